"""Reduced-coordinate domains, designs on them, and conditional sampling.

Once an active subspace is fixed, surrogate construction happens in the
reduced coordinates ``y = W1^T x``.  What that domain looks like depends on
the input density: a standard Gaussian stays a standard Gaussian in any
rotated frame, so designs live on a centered box of a few standard
deviations; a uniform hypercube projects to a zonotope, whose vertices we
enumerate for one and two dimensions.

Evaluating the ideal reduced-space function requires draws of the inactive
coordinates ``z`` conditioned on ``y``.  For the Gaussian those draws are
exact; for the hypercube they come from a hit-and-run random walk over the
polytope of feasible ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    ConfigError,
    InfeasiblePointError,
    NumericalError,
    UnsupportedDimensionError,
)
from .serialize import write_csv
from .subspace import ActiveSubspace

GAUSSIAN = "gaussian_standard"
UNIFORM = "uniform_hypercube"

# Tensor designs for Gaussian inputs span this many standard deviations.
GAUSSIAN_BOX_HALF_WIDTH = 3.0

HIT_AND_RUN_BURN_IN_PER_DIM = 100
HIT_AND_RUN_THINNING = 10


@dataclass(frozen=True)
class InputDomain:
    """Input density tag and dimension."""

    kind: str
    m: int

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, UNIFORM):
            raise ConfigError(
                f"kind must be {GAUSSIAN!r} or {UNIFORM!r}, got {self.kind!r}"
            )
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")

    @property
    def is_gaussian(self) -> bool:
        return self.kind == GAUSSIAN

    def poincare_constant(self) -> float:
        """Default constant in the MSE bounds for this input density."""
        if self.is_gaussian:
            return 1.0
        return 2.0 * np.sqrt(self.m) / np.pi

    def sample(self, M: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``M`` points from the input density."""
        if self.is_gaussian:
            return rng.standard_normal((M, self.m))
        return rng.uniform(-1.0, 1.0, size=(M, self.m))


def zonotope_vertices(W1: np.ndarray) -> np.ndarray:
    """Vertices of the projection of the cube [-1, 1]^m through W1^T.

    For ``n = 1`` the image is the symmetric interval with endpoint
    ``sum(|W1|)``.  For ``n = 2`` the rows of ``W1`` act as generators; the
    boundary is walked by sorting the generators by angle, which yields the
    vertices in counterclockwise order.  Only ``n <= 2`` is supported.
    """
    W1 = np.asarray(W1, dtype=float)
    if W1.ndim == 1:
        W1 = W1[:, None]
    m, n = W1.shape
    if n == 1:
        r = float(np.sum(np.abs(W1[:, 0])))
        return np.array([[-r], [r]])
    if n != 2:
        raise UnsupportedDimensionError(
            f"zonotope vertices are implemented for n <= 2, got n = {n}"
        )
    gens = W1.copy()
    norms = np.linalg.norm(gens, axis=1)
    gens = gens[norms > 1e-12]
    if gens.shape[0] == 0:
        raise NumericalError("all zonotope generators are numerically zero")
    # Normalize every generator to the upper half plane so each line
    # direction appears once; antipodal rows merge onto the same angle.
    flip = (gens[:, 1] < 0) | ((gens[:, 1] == 0) & (gens[:, 0] < 0))
    gens[flip] *= -1.0
    angles = np.arctan2(gens[:, 1], gens[:, 0])
    wrap = angles > np.pi - 1e-9
    angles[wrap] -= np.pi
    gens[wrap] *= -1.0
    order = np.argsort(angles, kind="stable")
    gens = gens[order]
    angles = angles[order]
    # Merge generators sharing a direction so parallel rows count once.
    merged = [gens[0].copy()]
    last_angle = angles[0]
    for gvec, ang in zip(gens[1:], angles[1:]):
        if ang - last_angle < 1e-9:
            merged[-1] += gvec
        else:
            merged.append(gvec.copy())
            last_angle = ang
    merged = np.asarray(merged)
    p = merged.shape[0]
    half = np.empty((p, 2))
    v = -np.sum(merged, axis=0)
    for k in range(p):
        half[k] = v
        v = v + 2.0 * merged[k]
    return np.vstack([half, -half])


def _point_in_polygon(vertices: np.ndarray, y: np.ndarray,
                      tol: float) -> bool:
    """Membership test for a convex polygon with counterclockwise vertices."""
    v1 = vertices
    v2 = np.roll(vertices, -1, axis=0)
    edge = v2 - v1
    rel = y[None, :] - v1
    cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
    return bool(np.all(cross >= -tol))


@dataclass
class ReducedDomain:
    """The reduced-coordinate domain induced by a subspace split.

    Gaussian inputs induce all of R^n (``vertices`` is None); hypercube
    inputs induce the zonotope ``{W1^T x : -1 <= x <= 1}`` whose vertices
    are precomputed at construction for ``n <= 2``.
    """

    input_domain: InputDomain
    subspace: ActiveSubspace
    vertices: np.ndarray | None = None

    def __post_init__(self):
        if self.input_domain.m != self.subspace.m:
            raise ConfigError(
                f"domain dimension {self.input_domain.m} does not match "
                f"subspace dimension {self.subspace.m}"
            )
        if self.vertices is None and not self.input_domain.is_gaussian:
            self.vertices = zonotope_vertices(self.subspace.W1)

    @property
    def n(self) -> int:
        return self.subspace.n

    @property
    def m(self) -> int:
        return self.subspace.m

    def contains(self, y: np.ndarray, tol: float = 1e-9) -> bool:
        y = np.asarray(y, dtype=float).ravel()
        if self.input_domain.is_gaussian:
            return True
        if self.n == 1:
            r = self.vertices[:, 0].max()
            return bool(abs(y[0]) <= r + tol)
        return _point_in_polygon(self.vertices, y, tol)


def tensor_design(domain: ReducedDomain, points_per_dim: int) -> np.ndarray:
    """Full tensor grid on the centered Gaussian design box.

    Each axis carries ``points_per_dim`` equally spaced levels on
    ``[-3, 3]``; the grid has ``points_per_dim**n`` rows, first coordinate
    varying slowest.
    """
    if not domain.input_domain.is_gaussian:
        raise ConfigError("tensor designs apply to Gaussian inputs; use "
                          "zonotope_design for hypercube inputs")
    if points_per_dim < 2:
        raise ConfigError(f"points_per_dim must be >= 2, got {points_per_dim}")
    w = GAUSSIAN_BOX_HALF_WIDTH
    axis = np.linspace(-w, w, points_per_dim)
    grids = np.meshgrid(*([axis] * domain.n), indexing="ij")
    return np.stack([g.ravel(order="C") for g in grids], axis=1)


def zonotope_design(domain: ReducedDomain, spacing: float) -> np.ndarray:
    """Regular grid clipped to the zonotope, with all vertices included.

    The grid covers the vertex bounding box at the given spacing; points
    outside the polygon are dropped and vertices not already on the grid are
    appended.  Supported for ``n <= 2``.
    """
    if domain.input_domain.is_gaussian:
        raise ConfigError("zonotope designs apply to hypercube inputs; use "
                          "tensor_design for Gaussian inputs")
    if spacing <= 0:
        raise ConfigError(f"spacing must be positive, got {spacing}")
    verts = domain.vertices
    n = domain.n
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    axes = []
    for d in range(n):
        count = int(np.floor((hi[d] - lo[d]) / spacing + 1e-9)) + 1
        axes.append(lo[d] + spacing * np.arange(count))
    grids = np.meshgrid(*axes, indexing="ij")
    candidates = np.stack([g.ravel(order="C") for g in grids], axis=1)
    keep = [y for y in candidates if domain.contains(y)]
    points = np.asarray(keep) if keep else np.empty((0, n))
    out = list(points)
    for v in verts:
        if not any(np.linalg.norm(v - p) <= 1e-12 for p in out):
            out.append(v)
    return np.asarray(out)


def lift_point(domain: ReducedDomain, y: np.ndarray) -> np.ndarray:
    """Find a full-space point whose active coordinates equal ``y``.

    Gaussian inputs use the minimum-norm lift ``x = W1 y``.  Hypercube
    inputs solve a feasibility linear program for ``x`` in the cube with
    ``W1^T x = y``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape != (domain.n,):
        raise ConfigError(f"y must have shape ({domain.n},), got {y.shape}")
    W1 = domain.subspace.W1
    if domain.input_domain.is_gaussian:
        return W1 @ y
    m = domain.m
    res = linprog(c=np.zeros(m), A_eq=W1.T, b_eq=y,
                  bounds=[(-1.0, 1.0)] * m, method="highs")
    if not res.success:
        raise InfeasiblePointError(
            f"no point of the hypercube maps to y = {y}: {res.message}"
        )
    x = res.x
    gap = np.linalg.norm(W1.T @ x - y)
    if gap > 1e-8:
        raise NumericalError(
            f"lift verification failed: ||W1^T x - y|| = {gap:.3e}"
        )
    return x


def sample_conditional_z(domain: ReducedDomain, y: np.ndarray, N: int,
                         seed) -> np.ndarray:
    """Draw ``N`` inactive-coordinate vectors conditioned on ``y``.

    Gaussian inputs: the conditional is a standard normal on the inactive
    coordinates, independent of ``y``, so the draws are exact.  Hypercube
    inputs: the conditional is uniform over the polytope
    ``{z : -1 <= W1 y + W2 z <= 1}``, sampled with hit-and-run started from
    a feasible lift, with fixed burn-in and thinning.

    Returns an ``(N, m - n)`` array.
    """
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    sub = domain.subspace
    d_z = domain.m - domain.n
    if domain.input_domain.is_gaussian:
        return rng.standard_normal((N, d_z))

    W2 = sub.W2
    x0 = lift_point(domain, y)
    z = W2.T @ x0
    base = sub.W1 @ y
    x_cur = base + W2 @ z
    burn = HIT_AND_RUN_BURN_IN_PER_DIM * d_z
    thin = HIT_AND_RUN_THINNING
    out = np.empty((N, d_z))
    taken = 0
    total = burn + N * thin
    tol = 1e-13
    for step in range(total):
        d = rng.standard_normal(d_z)
        d /= np.linalg.norm(d)
        u = W2 @ d
        lo_room = -1.0 - x_cur
        hi_room = 1.0 - x_cur
        pos = u > tol
        neg = u < -tol
        t_hi = np.inf
        t_lo = -np.inf
        if np.any(pos):
            t_hi = np.min(hi_room[pos] / u[pos])
            t_lo = np.max(lo_room[pos] / u[pos])
        if np.any(neg):
            t_hi = min(t_hi, np.min(lo_room[neg] / u[neg]))
            t_lo = max(t_lo, np.max(hi_room[neg] / u[neg]))
        if not np.isfinite(t_lo) or not np.isfinite(t_hi):
            raise NumericalError("unbounded chord in hit-and-run walk")
        # The current point is feasible, so the chord brackets zero up to
        # roundoff.
        t_lo = min(t_lo, 0.0)
        t_hi = max(t_hi, 0.0)
        width = t_hi - t_lo
        # At a vertex of the cube section the chord can collapse to a
        # point (width 0, possibly -0.0 from the face divisions); stay
        # put and let the next direction move us.
        t = 0.0 if width <= 0.0 else t_lo + width * rng.random()
        z = z + t * d
        if step % 64 == 63:
            x_cur = base + W2 @ z
        else:
            x_cur = x_cur + t * u
        if step >= burn and (step - burn) % thin == thin - 1:
            out[taken] = z
            taken += 1
    return out


def effective_sample_size(samples: np.ndarray) -> float:
    """Crude autocorrelation-based effective sample size of a chain.

    Uses the initial positive sequence of lag autocorrelations per
    coordinate and returns the most pessimistic coordinate.  Diagnostic
    only; nothing downstream corrects for it.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 1 and samples.shape[1] > 1:
        samples = samples.T
    N = samples.shape[0]
    if N < 4:
        return float(N)
    ess = []
    for col in samples.T:
        x = col - col.mean()
        var = np.dot(x, x) / N
        if var == 0:
            ess.append(float(N))
            continue
        s = 0.0
        for lag in range(1, N // 2):
            rho = np.dot(x[:-lag], x[lag:]) / (N * var)
            if rho <= 0:
                break
            s += rho
        ess.append(N / (1.0 + 2.0 * s))
    return float(min(ess))


def save_design_csv(design: np.ndarray, path) -> None:
    """Write one reduced-space point per row: y_1..y_n."""
    design = np.atleast_2d(np.asarray(design, dtype=float))
    header = [f"y{i + 1}" for i in range(design.shape[1])]
    write_csv(path, header, design)


def save_vertices_csv(vertices: np.ndarray, path) -> None:
    """Write zonotope vertices, counterclockwise for n = 2."""
    save_design_csv(vertices, path)
