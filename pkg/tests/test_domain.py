"""Tests for reduced domains: zonotopes, designs, lifting, sampling."""

import itertools

import numpy as np
import pytest

from activekrig.domain import (
    GAUSSIAN,
    UNIFORM,
    InputDomain,
    ReducedDomain,
    effective_sample_size,
    lift_point,
    sample_conditional_z,
    save_design_csv,
    tensor_design,
    zonotope_design,
    zonotope_vertices,
)
from activekrig.errors import (
    ConfigError,
    InfeasiblePointError,
    UnsupportedDimensionError,
)
from activekrig.subspace import ActiveSubspace


def coordinate_subspace(m, n, eigenvalues=None):
    ev = (np.linspace(m, 1, m) if eigenvalues is None
          else np.asarray(eigenvalues, float))
    return ActiveSubspace(W=np.eye(m), eigenvalues=ev, n=n)


def rotation_subspace(m, n, seed, eigenvalues=None):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    ev = (np.linspace(m, 1, m) if eigenvalues is None
          else np.asarray(eigenvalues, float))
    return ActiveSubspace(W=Q, eigenvalues=ev, n=n)


def halfplane_oracle(vertices):
    """Inward halfplane normals from counterclockwise vertices."""
    v1 = vertices
    v2 = np.roll(vertices, -1, axis=0)
    edges = v2 - v1
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    offsets = np.sum(normals * v1, axis=1)
    return normals, offsets


class TestInputDomain:
    def test_poincare_constants(self):
        assert InputDomain(GAUSSIAN, 7).poincare_constant() == 1.0
        assert InputDomain(UNIFORM, 100).poincare_constant() == pytest.approx(
            2.0 * 10.0 / np.pi)

    def test_bad_kind_rejected(self):
        with pytest.raises(ConfigError):
            InputDomain("lognormal", 3)

    def test_sampling_ranges(self):
        rng = np.random.default_rng(0)
        xs = InputDomain(UNIFORM, 4).sample(100, rng)
        assert xs.shape == (100, 4)
        assert np.all(np.abs(xs) <= 1.0)


class TestZonotopeVertices:
    def test_single_axis_interval(self):
        verts = zonotope_vertices(np.eye(3)[:, :1])
        np.testing.assert_allclose(np.sort(verts[:, 0]), [-1.0, 1.0])

    def test_one_dim_endpoint_is_abs_sum(self):
        w = np.array([[0.5], [-0.25], [0.25]])
        verts = zonotope_vertices(w)
        np.testing.assert_allclose(np.sort(verts[:, 0]), [-1.0, 1.0])

    def test_coordinate_square(self):
        verts = zonotope_vertices(np.eye(3)[:, :2])
        assert verts.shape == (4, 2)
        expected = {(-1, -1), (1, -1), (1, 1), (-1, 1)}
        got = {tuple(np.round(v, 12)) for v in verts}
        assert got == expected

    def test_generic_three_generators_give_hexagon(self):
        rng = np.random.default_rng(14)
        W1, _ = np.linalg.qr(rng.standard_normal((3, 2)))
        verts = zonotope_vertices(W1)
        assert verts.shape == (6, 2)

    def test_central_symmetry(self):
        rng = np.random.default_rng(5)
        W1, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        verts = zonotope_vertices(W1)
        for v in verts:
            assert np.min(np.linalg.norm(verts + v, axis=1)) <= 1e-12

    def test_counterclockwise_and_convex(self):
        rng = np.random.default_rng(8)
        W1, _ = np.linalg.qr(rng.standard_normal((6, 2)))
        verts = zonotope_vertices(W1)
        v1 = verts
        v2 = np.roll(verts, -1, axis=0)
        v3 = np.roll(verts, -2, axis=0)
        cross = ((v2[:, 0] - v1[:, 0]) * (v3[:, 1] - v2[:, 1])
                 - (v2[:, 1] - v1[:, 1]) * (v3[:, 0] - v2[:, 0]))
        assert np.all(cross > 0)
        # Shoelace area is positive for counterclockwise order.
        area = 0.5 * np.sum(v1[:, 0] * v2[:, 1] - v2[:, 0] * v1[:, 1])
        assert area > 0

    def test_every_vertex_is_a_sign_combination(self):
        # Brute-force oracle: vertices must be W1^T s over sign vectors s.
        rng = np.random.default_rng(3)
        W1, _ = np.linalg.qr(rng.standard_normal((4, 2)))
        verts = zonotope_vertices(W1)
        images = np.array([
            W1.T @ np.array(s)
            for s in itertools.product([-1.0, 1.0], repeat=4)
        ])
        for v in verts:
            assert np.min(np.linalg.norm(images - v, axis=1)) <= 1e-10

    def test_vertex_count_counts_distinct_directions(self):
        # Two parallel generator rows merge into one direction: a square
        # footprint with a repeated direction still has 4 vertices.
        W1 = np.array([[0.6, 0.0], [0.0, 1.0], [0.8, 0.0]])
        verts = zonotope_vertices(W1)
        assert verts.shape == (4, 2)
        got = {tuple(np.round(v, 12)) for v in verts}
        assert got == {(-1.4, -1.0), (1.4, -1.0), (1.4, 1.0), (-1.4, 1.0)}

    def test_antipodal_generators_count_once(self):
        W1 = np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 1.0]])
        verts = zonotope_vertices(W1)
        assert verts.shape == (4, 2)

    def test_three_dims_unsupported(self):
        with pytest.raises(UnsupportedDimensionError):
            zonotope_vertices(np.eye(4)[:, :3])


class TestTensorDesign:
    def test_five_levels_on_one_axis(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 3),
                            coordinate_subspace(3, 1))
        design = tensor_design(dom, 5)
        np.testing.assert_allclose(design[:, 0], [-3.0, -1.5, 0.0, 1.5, 3.0])

    def test_two_dims_full_grid(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 4),
                            coordinate_subspace(4, 2))
        design = tensor_design(dom, 3)
        assert design.shape == (9, 2)
        # First coordinate varies slowest.
        np.testing.assert_allclose(design[:3, 0], [-3.0, -3.0, -3.0])
        np.testing.assert_allclose(design[:3, 1], [-3.0, 0.0, 3.0])

    def test_too_few_levels_rejected(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(ConfigError):
            tensor_design(dom, 1)

    def test_wrong_domain_kind_rejected(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(ConfigError):
            tensor_design(dom, 3)


class TestZonotopeDesign:
    def test_interval_with_unit_spacing(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        design = zonotope_design(dom, 1.0)
        np.testing.assert_allclose(np.sort(design[:, 0]), [-1.0, 0.0, 1.0])

    def test_square_with_unit_spacing(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 2))
        design = zonotope_design(dom, 1.0)
        assert design.shape == (9, 2)
        got = {tuple(np.round(p, 12)) for p in design}
        expected = {(i, j) for i in (-1.0, 0.0, 1.0) for j in (-1.0, 0.0, 1.0)}
        assert got == expected

    def test_membership_against_halfplane_oracle(self):
        sub = rotation_subspace(5, 2, seed=2)
        dom = ReducedDomain(InputDomain(UNIFORM, 5), sub)
        design = zonotope_design(dom, 0.3)
        normals, offsets = halfplane_oracle(dom.vertices)
        for y in design:
            assert np.all(normals @ y >= offsets - 1e-9)

    def test_vertices_included(self):
        sub = rotation_subspace(4, 2, seed=6)
        dom = ReducedDomain(InputDomain(UNIFORM, 4), sub)
        design = zonotope_design(dom, 0.4)
        for v in dom.vertices:
            assert np.min(np.linalg.norm(design - v, axis=1)) <= 1e-12

    def test_bad_spacing_rejected(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(ConfigError):
            zonotope_design(dom, 0.0)

    def test_wrong_domain_kind_rejected(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(ConfigError):
            zonotope_design(dom, 0.5)


class TestLiftPoint:
    def test_gaussian_origin(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 4),
                            coordinate_subspace(4, 2))
        np.testing.assert_array_equal(lift_point(dom, [0.0, 0.0]),
                                      np.zeros(4))

    def test_gaussian_is_w1_times_y(self):
        sub = rotation_subspace(5, 2, seed=11)
        dom = ReducedDomain(InputDomain(GAUSSIAN, 5), sub)
        y = np.array([1.2, -0.4])
        np.testing.assert_allclose(lift_point(dom, y), sub.W1 @ y,
                                   atol=1e-15)

    def test_gaussian_unit_step_along_ridge_direction(self):
        a = np.array([0.7, 0.3])
        w1 = (a / np.linalg.norm(a))[:, None]
        W = np.hstack([w1, np.array([[-w1[1, 0]], [w1[0, 0]]])])
        sub = ActiveSubspace(W=W, eigenvalues=np.array([1.0, 0.0]), n=1)
        dom = ReducedDomain(InputDomain(GAUSSIAN, 2), sub)
        x = lift_point(dom, [1.0])
        np.testing.assert_allclose(x, [0.9191, 0.3939], atol=1e-4)

    def test_uniform_feasible_lift(self):
        sub = rotation_subspace(6, 2, seed=1)
        dom = ReducedDomain(InputDomain(UNIFORM, 6), sub)
        rng = np.random.default_rng(0)
        for _ in range(5):
            s = rng.uniform(-1.0, 1.0, size=6)
            y = sub.W1.T @ s  # guaranteed inside the zonotope
            x = lift_point(dom, y)
            assert np.all(np.abs(x) <= 1.0 + 1e-9)
            assert np.linalg.norm(sub.W1.T @ x - y) <= 1e-8

    def test_uniform_coordinate_case(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        x = lift_point(dom, [0.5])
        assert abs(x[0] - 0.5) <= 1e-10
        assert np.all(np.abs(x) <= 1.0 + 1e-12)

    def test_uniform_infeasible_outside_zonotope(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(InfeasiblePointError):
            lift_point(dom, [2.0])

    def test_wrong_shape_rejected(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(ConfigError):
            lift_point(dom, [1.0, 2.0])


class TestSampleConditionalZ:
    def test_gaussian_shape_and_determinism(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 5),
                            coordinate_subspace(5, 2))
        a = sample_conditional_z(dom, [0.5, -0.5], N=7, seed=3)
        b = sample_conditional_z(dom, [0.5, -0.5], N=7, seed=3)
        assert a.shape == (7, 3)
        np.testing.assert_array_equal(a, b)

    def test_gaussian_law_of_large_numbers(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 4),
                            coordinate_subspace(4, 1))
        z = sample_conditional_z(dom, [1.0], N=100000, seed=9)
        assert np.all(np.abs(z.mean(axis=0)) <= 0.02)
        assert np.all(np.abs(z.std(axis=0) - 1.0) <= 0.02)

    def test_uniform_membership(self):
        sub = rotation_subspace(4, 2, seed=17)
        dom = ReducedDomain(InputDomain(UNIFORM, 4), sub)
        rng = np.random.default_rng(2)
        s = rng.uniform(-0.5, 0.5, size=4)
        y = sub.W1.T @ s
        z = sample_conditional_z(dom, y, N=200, seed=5)
        full = (sub.W1 @ y)[None, :] + z @ sub.W2.T
        assert np.all(np.abs(full) <= 1.0 + 1e-9)

    def test_uniform_slice_mean(self):
        # Conditional of x2 given x1 = 0 on the square is uniform on
        # [-1, 1]; the chain mean over 1e4 draws should sit near zero.
        dom = ReducedDomain(InputDomain(UNIFORM, 2),
                            coordinate_subspace(2, 1))
        z = sample_conditional_z(dom, [0.0], N=10000, seed=1)
        assert abs(z.mean()) <= 0.05

    def test_uniform_histogram_close_to_flat(self):
        # With an axis-aligned split the conditional over (z1, z2) is
        # uniform on the square, so each marginal histogram should be flat.
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        z = sample_conditional_z(dom, [0.3], N=10000, seed=7)
        counts, _ = np.histogram(z[:, 0], bins=10, range=(-1.0, 1.0))
        freq = counts / z.shape[0]
        assert np.max(np.abs(freq - 0.1)) <= 0.1 * 0.1 + 0.02
        assert np.max(np.abs(freq - 0.1)) <= 0.1

    def test_uniform_determinism(self):
        dom = ReducedDomain(InputDomain(UNIFORM, 3),
                            coordinate_subspace(3, 1))
        a = sample_conditional_z(dom, [0.2], N=25, seed=11)
        b = sample_conditional_z(dom, [0.2], N=25, seed=11)
        np.testing.assert_array_equal(a, b)

    def test_bad_N_rejected(self):
        dom = ReducedDomain(InputDomain(GAUSSIAN, 3),
                            coordinate_subspace(3, 1))
        with pytest.raises(ConfigError):
            sample_conditional_z(dom, [0.0], N=0, seed=0)


class TestEffectiveSampleSize:
    def test_iid_chain_scores_near_full(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(2000)
        ess = effective_sample_size(x)
        assert 1000 <= ess <= 2000

    def test_sticky_chain_scores_low(self):
        rng = np.random.default_rng(1)
        x = np.empty(2000)
        x[0] = 0.0
        for i in range(1, 2000):
            x[i] = 0.95 * x[i - 1] + rng.standard_normal() * 0.1
        ess = effective_sample_size(x)
        assert ess < 500

    def test_bounded_by_length(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((500, 2))
        assert 0 < effective_sample_size(x) <= 500


class TestDesignSerialization:
    def test_design_csv_header(self, tmp_path):
        path = tmp_path / "design.csv"
        save_design_csv(np.array([[1.0, 2.0], [3.0, 4.0]]), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "y1,y2"
        assert len(lines) == 3

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            ReducedDomain(InputDomain(GAUSSIAN, 4), coordinate_subspace(3, 1))
