"""Detect dominant input directions of a scalar function from its gradients.

The central object is the matrix ``C = E[grad f grad f^T]``.  Its eigenvectors
split the input space into directions along which the function varies strongly
(the active subspace) and directions it barely notices.  We estimate ``C``
from a Monte Carlo gradient sample through the thin SVD of the scaled
gradient matrix, so the eigenvalue estimates are exact squares of singular
values and never go negative.

The module also evaluates the a priori mean-squared-error bounds that justify
building a response surface on the active subspace alone, including the
variants that account for Monte Carlo averaging, response-surface error, and
an imperfectly estimated subspace.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateSubspaceError
from .serialize import read_csv, read_json, write_csv, write_json

_ORTHO_TOL = 1e-10
_EIG_FLOOR = -1e-12


def _as_float_array(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass
class GradientSampleSet:
    """Input points with function values and gradients, one row per sample.

    ``points`` and ``gradients`` are ``(M, m)``; ``values`` is ``(M,)``.
    """

    points: np.ndarray
    values: np.ndarray
    gradients: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.gradients = np.atleast_2d(np.asarray(self.gradients, dtype=float))
        M, m = self.points.shape
        if self.gradients.shape != (M, m):
            raise ValueError(
                f"gradients shape {self.gradients.shape} does not match "
                f"points shape {(M, m)}"
            )
        if self.values.shape != (M,):
            raise ValueError(
                f"values shape {self.values.shape} does not match M={M}"
            )
        for name, arr in (("points", self.points), ("values", self.values),
                          ("gradients", self.gradients)):
            bad = ~np.isfinite(arr)
            if np.any(bad):
                idx = int(np.nonzero(bad.reshape(M, -1).any(axis=1))[0][0])
                raise ValueError(f"sample {idx} has non-finite {name}")

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def value_variance(self) -> float:
        """Biased sample variance of the recorded function values."""
        return float(np.mean((self.values - np.mean(self.values)) ** 2))


@dataclass
class ActiveSubspace:
    """Orthonormal eigenvector basis with eigenvalues and a split index.

    ``W`` is ``(m, m)`` with orthonormal columns, ``eigenvalues`` is
    descending and nonnegative, and the first ``n`` columns span the active
    subspace.  Reduced coordinates are ``y = W1^T x`` and ``z = W2^T x``.
    """

    W: np.ndarray
    eigenvalues: np.ndarray
    n: int

    def __post_init__(self):
        self.W = _as_float_array(self.W, "W")
        self.eigenvalues = _as_float_array(self.eigenvalues, "eigenvalues")
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError(f"W must be square, got shape {self.W.shape}")
        m = self.W.shape[0]
        if self.eigenvalues.shape != (m,):
            raise ValueError("eigenvalues must have one entry per column of W")
        gram_err = np.linalg.norm(self.W.T @ self.W - np.eye(m), 2)
        if gram_err > _ORTHO_TOL:
            raise ValueError(
                f"W is not orthonormal: ||W^T W - I|| = {gram_err:.3e}"
            )
        ev = self.eigenvalues
        if np.any(np.diff(ev) > 1e-12 * max(ev[0], 1.0)):
            raise ValueError("eigenvalues must be in descending order")
        if np.any(ev < _EIG_FLOOR):
            raise ValueError("eigenvalues must be nonnegative")
        self.eigenvalues = np.maximum(ev, 0.0)
        if not (1 <= self.n < m):
            raise ValueError(f"n must satisfy 1 <= n < m, got n={self.n}, m={m}")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def W1(self) -> np.ndarray:
        return self.W[:, : self.n]

    @property
    def W2(self) -> np.ndarray:
        return self.W[:, self.n:]

    @property
    def active_values(self) -> np.ndarray:
        return self.eigenvalues[: self.n]

    @property
    def tail_values(self) -> np.ndarray:
        return self.eigenvalues[self.n:]

    def active_sum(self) -> float:
        return float(np.sum(self.active_values))

    def tail_sum(self) -> float:
        return float(np.sum(self.tail_values))

    def to_active(self, x: np.ndarray) -> np.ndarray:
        """Project full-space point(s) onto active coordinates y = W1^T x."""
        return np.asarray(x, dtype=float) @ self.W1


def assemble_gradient_matrix(samples: GradientSampleSet) -> np.ndarray:
    """Stack sampled gradients into the scaled matrix whose SVD we take.

    Returns the ``(m, M)`` matrix with columns ``grad f(x_j) / sqrt(M)``, so
    that ``G G^T`` is the Monte Carlo estimate of ``E[grad f grad f^T]``.
    """
    if not np.all(np.isfinite(samples.gradients)):
        bad = ~np.isfinite(samples.gradients).all(axis=1)
        idx = int(np.nonzero(bad)[0][0])
        raise ValueError(f"sample {idx} has non-finite gradient entries")
    return samples.gradients.T / np.sqrt(samples.M)


def _fix_column_signs(W: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive.

    Ties go to the lowest index, which is what argmax returns.
    """
    W = W.copy()
    idx = np.argmax(np.abs(W), axis=0)
    flip = W[idx, np.arange(W.shape[1])] < 0
    W[:, flip] *= -1.0
    return W


def estimate_subspace(samples: GradientSampleSet, n: int) -> ActiveSubspace:
    """Estimate the active subspace from sampled gradients.

    The SVD route ``G = W S V^T`` gives eigenvalues ``S**2`` of the empirical
    second-moment matrix directly.  When fewer samples than dimensions are
    available the basis is completed with an orthonormal complement and the
    missing eigenvalues are exactly zero.
    """
    m, M = samples.m, samples.M
    if not (1 <= n < m):
        raise ValueError(f"n must satisfy 1 <= n < m, got n={n}, m={m}")
    G = assemble_gradient_matrix(samples)
    if not np.any(G):
        raise DegenerateSubspaceError(
            "all sampled gradients are zero; no subspace information"
        )
    U, s, _ = np.linalg.svd(G, full_matrices=False)
    if U.shape[1] < m:
        # Complete the basis: QR of an orthonormal U yields Q whose trailing
        # columns span the orthogonal complement.
        Q, _ = np.linalg.qr(U, mode="complete")
        U = np.hstack([U, Q[:, U.shape[1]:]])
        s = np.concatenate([s, np.zeros(m - s.size)])
    eigenvalues = s**2
    W = _fix_column_signs(U)
    return ActiveSubspace(W=W, eigenvalues=eigenvalues, n=n)


def subspace_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Spectral-norm distance between two orthonormal bases.

    Each column of ``B`` is sign-aligned with the matching column of ``A``
    before taking the norm, so the result is invariant to the sign ambiguity
    of eigenvectors.  Values lie in ``[0, 2]``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    k = A.shape[1]
    for name, X in (("A", A), ("B", B)):
        err = np.linalg.norm(X.T @ X - np.eye(k), 2)
        if err > 1e-8:
            raise ValueError(f"{name} does not have orthonormal columns")
    signs = np.where(np.sum(A * B, axis=0) < 0, -1.0, 1.0)
    return float(np.linalg.norm(A - B * signs, 2))


def _rotate_pairs(W: np.ndarray, pairs, coeffs, t: float) -> np.ndarray:
    out = W.copy()
    for (i, j), c in zip(pairs, coeffs):
        th = t * c
        ci, si = np.cos(th), np.sin(th)
        wi = out[:, i].copy()
        wj = out[:, j].copy()
        out[:, i] = ci * wi + si * wj
        out[:, j] = -si * wi + ci * wj
    return out


def perturb_subspace(subspace: ActiveSubspace, epsilon: float,
                     seed: int) -> ActiveSubspace:
    """Return a seeded random perturbation of the eigenvector basis.

    Random column pairs of ``W`` are rotated by a common angle scale, and the
    scale is bisected until ``subspace_distance(W, W_tilde)`` lands in
    ``[0.9 * epsilon, epsilon]``.  Eigenvalues are carried over unchanged and
    ``epsilon = 0`` returns the basis exactly.
    """
    if not (0.0 <= epsilon <= 0.5):
        raise ValueError(f"epsilon must be in [0, 0.5], got {epsilon}")
    W = subspace.W
    ev = subspace.eigenvalues
    if epsilon == 0.0:
        return ActiveSubspace(W=W.copy(), eigenvalues=ev.copy(), n=subspace.n)
    m = subspace.m
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    pairs = [(int(perm[2 * k]), int(perm[2 * k + 1])) for k in range(m // 2)]
    coeffs = rng.uniform(0.5, 1.0, size=len(pairs))

    def dist(t: float) -> float:
        return subspace_distance(W, _rotate_pairs(W, pairs, coeffs, t))

    lo, hi = 0.0, epsilon
    for _ in range(60):
        if dist(hi) >= 0.9 * epsilon:
            break
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        d = dist(hi)
        if 0.9 * epsilon <= d <= epsilon:
            break
        mid = 0.5 * (lo + hi)
        if dist(mid) < 0.9 * epsilon:
            lo = mid
        else:
            hi = mid
    else:
        raise DegenerateSubspaceError(
            f"could not tune perturbation to distance [{0.9 * epsilon}, "
            f"{epsilon}]"
        )
    Wt = _rotate_pairs(W, pairs, coeffs, hi)
    return ActiveSubspace(W=Wt, eigenvalues=ev.copy(), n=subspace.n)


@dataclass
class BoundInputs:
    """Everything the mean-squared-error bound evaluators consume.

    ``C1`` is the Poincare constant of the input density, ``N`` the number of
    Monte Carlo draws per surrogate evaluation, ``C2delta`` the response
    surface contribution (an opaque user-supplied value), and ``epsilon`` the
    subspace perturbation size.
    """

    eigenvalues: np.ndarray
    n: int
    C1: float = 1.0
    N: int = 1
    C2delta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        self.eigenvalues = _as_float_array(self.eigenvalues, "eigenvalues")
        ev = self.eigenvalues
        if ev.ndim != 1 or ev.size < 2:
            raise ValueError("eigenvalues must be a vector of length >= 2")
        if np.any(np.diff(ev) > 1e-12 * max(ev[0], 1.0)):
            raise ValueError("eigenvalues must be in descending order")
        if np.any(ev < _EIG_FLOOR):
            raise ValueError("eigenvalues must be nonnegative")
        self.eigenvalues = np.maximum(ev, 0.0)
        if not (1 <= self.n < ev.size):
            raise ValueError(f"n must satisfy 1 <= n < m, got {self.n}")
        if self.C1 <= 0:
            raise ValueError("C1 must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be an integer >= 1")
        self.N = int(self.N)
        if self.C2delta < 0:
            raise ValueError("C2delta must be nonnegative")
        if not (0.0 <= self.epsilon <= 0.5):
            raise ValueError("epsilon must be in [0, 0.5]")

    def active_sum(self) -> float:
        return float(np.sum(self.eigenvalues[: self.n]))

    def tail_sum(self) -> float:
        return float(np.sum(self.eigenvalues[self.n:]))


def bound_conditional(b: BoundInputs) -> float:
    """MSE bound for the exact conditional-expectation approximation."""
    return b.C1 * b.tail_sum()


def bound_monte_carlo(b: BoundInputs) -> float:
    """MSE bound when the conditional expectation is averaged over N draws."""
    return b.C1 * (1.0 + 1.0 / b.N) * b.tail_sum()


def bound_response_surface(b: BoundInputs) -> float:
    """Monte Carlo bound plus the response-surface training contribution."""
    return bound_monte_carlo(b) + b.C2delta


def bound_perturbed(b: BoundInputs, kind: str) -> float:
    """MSE bound when the subspace itself is off by at most ``epsilon``.

    The perturbation mixes a fraction of the active eigenvalue mass into the
    error term: the base factor is
    ``(epsilon * sqrt(active sum) + sqrt(tail sum))**2``.  ``kind`` selects
    which approximation chain the bound describes: ``conditional`` has no
    Monte Carlo factor, ``monte_carlo`` multiplies by ``(1 + 1/N)``, and
    ``response_surface`` additionally adds ``C2delta``.
    """
    if b.epsilon == 0.0:
        base = b.tail_sum()
    else:
        base = (b.epsilon * np.sqrt(b.active_sum())
                + np.sqrt(b.tail_sum())) ** 2
    if kind == "conditional":
        return b.C1 * base
    if kind == "monte_carlo":
        return b.C1 * (1.0 + 1.0 / b.N) * base
    if kind == "response_surface":
        return b.C1 * (1.0 + 1.0 / b.N) * base + b.C2delta
    raise ValueError(
        f"kind must be 'conditional', 'monte_carlo' or 'response_surface', "
        f"got {kind!r}"
    )


def local_sensitivity_ranking(model, point) -> np.ndarray:
    """Rank coordinates by gradient magnitude at a single point.

    Returns a permutation of ``range(m)`` sorted by ``|df/dx_i|`` descending,
    ties broken by the lower index.  A zero gradient falls back to index
    order and emits a warning, since the ranking then carries no information.
    """
    point = np.asarray(point, dtype=float)
    g = np.asarray(model.grad(point), dtype=float)
    mag = np.abs(g)
    if np.all(mag == 0.0):
        warnings.warn(
            "gradient is zero at the ranking point; falling back to index "
            "order", RuntimeWarning, stacklevel=2)
        return np.arange(g.size)
    return np.argsort(-mag, kind="stable")


# ---------------------------------------------------------------------------
# serialization

def save_samples_csv(samples: GradientSampleSet, path) -> None:
    """Write one row per sample: x_1..x_m, f, g_1..g_m."""
    m = samples.m
    header = ([f"x{i + 1}" for i in range(m)] + ["f"]
              + [f"g{i + 1}" for i in range(m)])
    rows = np.hstack([samples.points, samples.values[:, None],
                      samples.gradients])
    write_csv(path, header, rows)


def load_samples_csv(path) -> GradientSampleSet:
    header, data = read_csv(path)
    if len(header) % 2 != 1:
        raise ConfigError(f"malformed sample CSV header in {path}")
    m = (len(header) - 1) // 2
    expected = ([f"x{i + 1}" for i in range(m)] + ["f"]
                + [f"g{i + 1}" for i in range(m)])
    if header != expected:
        raise ConfigError(f"unexpected sample CSV header in {path}")
    return GradientSampleSet(points=data[:, :m], values=data[:, m],
                             gradients=data[:, m + 1:])


def subspace_to_dict(subspace: ActiveSubspace) -> dict:
    return {
        "m": subspace.m,
        "n": subspace.n,
        "eigenvalues": [float(v) for v in subspace.eigenvalues],
        "W": [float(v) for v in subspace.W.ravel(order="C")],
    }


def subspace_from_dict(d: dict) -> ActiveSubspace:
    try:
        m = int(d["m"])
        n = int(d["n"])
        ev = np.asarray(d["eigenvalues"], dtype=float)
        W = np.asarray(d["W"], dtype=float).reshape(m, m, order="C")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed subspace record: {exc}") from exc
    return ActiveSubspace(W=W, eigenvalues=ev, n=n)


def save_subspace_json(subspace: ActiveSubspace, path) -> None:
    write_json(path, subspace_to_dict(subspace))


def load_subspace_json(path) -> ActiveSubspace:
    return subspace_from_dict(read_json(path))
