"""Test functions with exact gradients, from closed forms to a PDE model.

Three families share one calling convention (``eval``/``grad`` with counted
invocations):

* ridge functions ``f(x) = h(a^T x)``, which have a one-dimensional active
  subspace by construction;
* quadratic forms ``f(x) = x^T A x``, whose gradient second-moment matrix is
  ``4 A^2`` under a standard Gaussian, giving a fully known spectrum;
* the scalar output of a second-order elliptic boundary value problem
  ``-div(a grad u) = 1`` on the unit square with a log-normal coefficient
  field, the kind of model the method is meant for.

The coefficient field is ``log a = sum_i x_i * gamma_i * phi_i`` where
``(gamma_i**2, phi_i)`` are the leading eigenpairs of the correlation
operator with kernel ``exp(-||s - t||_1 / beta)``, computed on the same grid
as the PDE by a trapezoid-weighted symmetric eigenproblem.  The output
functional is the average of the solution along the right edge, and its
gradient with respect to all ``m`` coefficients comes from one adjoint
solve, so a gradient costs exactly two sparse solves no matter how large
``m`` is.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .domain import GAUSSIAN, UNIFORM, InputDomain
from .errors import CoefficientOverflowError, ConfigError

LOG_COEFFICIENT_LIMIT = 50.0
MAX_GRID_NODES = 4096
MIN_GRID_POINTS = 17

_KL_MEMO: dict = {}
_KL_CACHE_VERSION = "v1"


class ModelFunction:
    """A scalar function with gradient, input-density tag, and counters."""

    def __init__(self, m: int, domain: InputDomain, eval_fn, grad_fn,
                 name: str = "", backend=None):
        if domain.m != m:
            raise ConfigError(
                f"domain dimension {domain.m} does not match m = {m}")
        self.m = m
        self.domain = domain
        self._eval = eval_fn
        self._grad = grad_fn
        self.name = name
        self.backend = backend
        self.eval_count = 0
        self.grad_count = 0
        # When set to a list, eval records the raw bytes of each input so
        # callers can audit which points were spent where.
        self.trace = None

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.m,):
            raise ConfigError(f"x must have shape ({self.m},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConfigError("x contains non-finite entries")
        return x

    def eval(self, x) -> float:
        x = self._check_point(x)
        self.eval_count += 1
        if self.trace is not None:
            self.trace.append(x.tobytes())
        return float(self._eval(x))

    def grad(self, x) -> np.ndarray:
        x = self._check_point(x)
        self.grad_count += 1
        return np.asarray(self._grad(x), dtype=float)

    def reset_counters(self) -> None:
        self.eval_count = 0
        self.grad_count = 0


def _domain_from_kind(kind: str, m: int) -> InputDomain:
    aliases = {"gaussian": GAUSSIAN, GAUSSIAN: GAUSSIAN,
               "uniform": UNIFORM, UNIFORM: UNIFORM}
    if kind not in aliases:
        raise ConfigError(f"unknown domain kind {kind!r}")
    return InputDomain(aliases[kind], m)


def make_ridge(a, h: str = "exp",
               domain_kind: str = "gaussian") -> ModelFunction:
    """Ridge function f(x) = h(a^T x) with profile h in {exp, identity}."""
    a = np.asarray(a, dtype=float).ravel()
    if a.size < 2:
        raise ConfigError("ridge direction must have at least 2 entries")
    if not np.any(a):
        raise ConfigError("ridge direction must be nonzero")
    if h == "exp":
        def eval_fn(x):
            return np.exp(a @ x)

        def grad_fn(x):
            return np.exp(a @ x) * a
    elif h == "identity":
        def eval_fn(x):
            return a @ x

        def grad_fn(x):
            return a.copy()
    else:
        raise ConfigError(f"h must be 'exp' or 'identity', got {h!r}")
    return ModelFunction(a.size, _domain_from_kind(domain_kind, a.size),
                         eval_fn, grad_fn, name=f"ridge-{h}")


def make_quadratic_form(A, domain_kind: str = "gaussian") -> ModelFunction:
    """Quadratic form f(x) = x^T A x for symmetric A."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = np.diag(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise ConfigError(f"A must be square with size >= 2, got {A.shape}")
    if np.max(np.abs(A - A.T)) > 1e-12 * max(np.max(np.abs(A)), 1.0):
        raise ConfigError("A must be symmetric")
    A = 0.5 * (A + A.T)
    m = A.shape[0]

    def eval_fn(x):
        return x @ A @ x

    def grad_fn(x):
        return 2.0 * (A @ x)

    return ModelFunction(m, _domain_from_kind(domain_kind, m),
                         eval_fn, grad_fn, name="quadratic-form")


# ---------------------------------------------------------------------------
# correlated random field

def kl_decompose(q: int, beta: float, m: int,
                 cache_dir: str | None = None):
    """Leading eigenpairs of the exp(-||s-t||_1 / beta) correlation operator.

    The operator is discretized on the q-by-q node grid of the unit square
    with trapezoid quadrature weights; symmetrizing with the square-root
    weights gives an ordinary symmetric eigenproblem.  Returns ``gamma``
    (square roots of the leading m eigenvalues, descending) and ``modes``
    with one column per mode, sampled on the nodes and orthonormal under the
    quadrature inner product.

    Results are memoized in-process and optionally in an .npz sidecar keyed
    by (q, beta, m).
    """
    if q < 2:
        raise ConfigError(f"q must be >= 2, got {q}")
    if q * q > MAX_GRID_NODES:
        raise ConfigError(
            f"q^2 = {q * q} exceeds the dense-eigenproblem guard "
            f"({MAX_GRID_NODES} nodes)")
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    if not (1 <= m <= q * q):
        raise ConfigError(f"m must be in [1, q^2], got {m}")
    key = (q, float(beta), m)
    if key in _KL_MEMO:
        return _KL_MEMO[key]
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(
            cache_dir,
            f"kl_{_KL_CACHE_VERSION}_q{q}_beta{beta:g}_m{m}.npz")
        if os.path.exists(path):
            with np.load(path) as data:
                result = (data["gamma"].copy(), data["modes"].copy())
            _KL_MEMO[key] = result
            return result
    t = np.linspace(0.0, 1.0, q)
    s1, s2 = np.meshgrid(t, t, indexing="ij")
    s1 = s1.ravel(order="C")
    s2 = s2.ravel(order="C")
    dist = (np.abs(s1[:, None] - s1[None, :])
            + np.abs(s2[:, None] - s2[None, :]))
    C = np.exp(-dist / beta)
    h = 1.0 / (q - 1)
    w1 = np.full(q, h)
    w1[0] = w1[-1] = 0.5 * h
    w = (w1[:, None] * w1[None, :]).ravel(order="C")
    sqw = np.sqrt(w)
    B = sqw[:, None] * C * sqw[None, :]
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:m]
    vals = np.maximum(vals[order], 0.0)
    modes = vecs[:, order] / sqw[:, None]
    idx = np.argmax(np.abs(modes), axis=0)
    flip = modes[idx, np.arange(m)] < 0
    modes[:, flip] *= -1.0
    gamma = np.sqrt(vals)
    result = (gamma, modes)
    _KL_MEMO[key] = result
    if path is not None:
        np.savez(path, gamma=gamma, modes=modes)
    return result


# ---------------------------------------------------------------------------
# elliptic model

@dataclass
class DiscreteSystem:
    """Assembled linear system: stiffness, load, and output weights."""

    K: sp.csc_matrix
    f_rhs: np.ndarray
    qoi_weights: np.ndarray


class EllipticModel:
    """Boundary-average output of -div(a grad u) = 1 on the unit square.

    Nodes live on a q-by-q grid with spacing ``h = 1/(q-1)``; ``u = 0`` is
    imposed on the left, bottom, and top edges and a no-flux condition holds
    on the right edge.  The output is the trapezoid average of ``u`` along
    the right edge.  The coefficient is ``a = exp(sum_i x_i gamma_i phi_i)``
    with the field evaluated at cell centers (mean of the four corner
    nodes); the stencil is the standard five-point form whose edge
    conductances average the two adjacent cell coefficients.
    """

    def __init__(self, q: int = 33, beta: float = 1.0, m: int = 100,
                 cache_dir: str | None = None):
        if q < MIN_GRID_POINTS:
            raise ConfigError(f"q must be >= {MIN_GRID_POINTS}, got {q}")
        if not (2 <= m <= q * q):
            raise ConfigError(f"m must be in [2, q^2], got {m}")
        self.q = q
        self.beta = float(beta)
        self.m = m
        self.h = 1.0 / (q - 1)
        self.kl_values, self.kl_modes = kl_decompose(q, beta, m,
                                                     cache_dir=cache_dir)
        self.solve_count = 0

        # Cell-center mode values: mean of the four corner nodes.
        modes_grid = self.kl_modes.reshape(q, q, m, order="C")
        cells = 0.25 * (modes_grid[:-1, :-1] + modes_grid[1:, :-1]
                        + modes_grid[:-1, 1:] + modes_grid[1:, 1:])
        self._cell_modes = cells.reshape((q - 1) * (q - 1), m, order="C")

        # Free nodes: everything except the Dirichlet edges (left, bottom,
        # top).  The right edge keeps its nodes; the no-flux condition is
        # natural for this stencil.
        ix, iy = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
        free = (ix >= 1) & (iy >= 1) & (iy <= q - 2)
        self._free_mask = free
        self.n_free = int(free.sum())
        free_index = -np.ones((q, q), dtype=int)
        free_index[free] = np.arange(self.n_free)
        self._free_index = free_index

        # Load vector: dual-cell areas of the free nodes.
        wx = np.full(q, self.h)
        wx[0] = wx[-1] = 0.5 * self.h
        area = wx[:, None] * wx[None, :]
        self._f_rhs = area[free]

        # Output weights: trapezoid rule along the right edge; the corner
        # nodes are Dirichlet and drop out.
        qoi = np.zeros((q, q))
        qoi[q - 1, 1:q - 1] = self.h
        self._qoi_weights = qoi[free]

        self._edge_index_cache = self._build_edge_indices()

    def _build_edge_indices(self):
        q = self.q
        fi = self._free_index
        # Horizontal edges: (ex, ey) -- (ex+1, ey).
        hx, hy = np.meshgrid(np.arange(q - 1), np.arange(q), indexing="ij")
        h_i = fi[hx, hy].ravel()
        h_j = fi[hx + 1, hy].ravel()
        # Vertical edges: (ex, ey) -- (ex, ey+1).
        vx, vy = np.meshgrid(np.arange(q), np.arange(q - 1), indexing="ij")
        v_i = fi[vx, vy].ravel()
        v_j = fi[vx, vy + 1].ravel()
        return h_i, h_j, v_i, v_j

    def log_coefficient_cells(self, x: np.ndarray,
                              log_offset: float = 0.0) -> np.ndarray:
        """log a at cell centers, guarded against exp overflow."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.m,):
            raise ConfigError(f"x must have shape ({self.m},), got {x.shape}")
        log_a = self._cell_modes @ (self.kl_values * x) + log_offset
        peak = float(np.max(np.abs(log_a)))
        if peak > LOG_COEFFICIENT_LIMIT:
            raise CoefficientOverflowError(
                f"|log a| reaches {peak:.2f}, beyond the safe limit "
                f"{LOG_COEFFICIENT_LIMIT}")
        return log_a

    def _conductances(self, a_cells: np.ndarray):
        q = self.q
        a = a_cells.reshape(q - 1, q - 1, order="C")
        Th = np.empty((q - 1, q))
        Th[:, 1:q - 1] = 0.5 * (a[:, :-1] + a[:, 1:])
        Th[:, 0] = 0.5 * a[:, 0]
        Th[:, q - 1] = 0.5 * a[:, -1]
        Tv = np.empty((q, q - 1))
        Tv[1:q - 1, :] = 0.5 * (a[:-1, :] + a[1:, :])
        Tv[0, :] = 0.5 * a[0, :]
        Tv[q - 1, :] = 0.5 * a[-1, :]
        return Th, Tv

    def assemble(self, x, log_offset: float = 0.0) -> DiscreteSystem:
        a_cells = np.exp(self.log_coefficient_cells(x, log_offset))
        Th, Tv = self._conductances(a_cells)
        h_i, h_j, v_i, v_j = self._edge_index_cache
        T = np.concatenate([Th.ravel(), Tv.ravel()])
        ei = np.concatenate([h_i, v_i])
        ej = np.concatenate([h_j, v_j])
        rows, cols, vals = [], [], []
        both = (ei >= 0) & (ej >= 0)
        rows.extend([ei[both], ej[both], ei[both], ej[both]])
        cols.extend([ei[both], ej[both], ej[both], ei[both]])
        vals.extend([T[both], T[both], -T[both], -T[both]])
        half_i = (ei >= 0) & (ej < 0)
        rows.append(ei[half_i])
        cols.append(ei[half_i])
        vals.append(T[half_i])
        half_j = (ei < 0) & (ej >= 0)
        rows.append(ej[half_j])
        cols.append(ej[half_j])
        vals.append(T[half_j])
        K = sp.coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_free, self.n_free)).tocsc()
        return DiscreteSystem(K=K, f_rhs=self._f_rhs.copy(),
                              qoi_weights=self._qoi_weights.copy())

    def _embed(self, values: np.ndarray) -> np.ndarray:
        grid = np.zeros((self.q, self.q))
        grid[self._free_mask] = values
        return grid

    def solve_qoi(self, x, log_offset: float = 0.0) -> float:
        system = self.assemble(x, log_offset)
        lu = splu(system.K)
        u = lu.solve(system.f_rhs)
        self.solve_count += 1
        return float(system.qoi_weights @ u)

    def gradient_adjoint(self, x) -> np.ndarray:
        """Gradient of the output with respect to all m coefficients.

        One factorization serves the forward and the adjoint solve; the
        stiffness matrix is symmetric, so the adjoint system reuses it.
        """
        a_cells = np.exp(self.log_coefficient_cells(x))
        system = self.assemble(x)
        lu = splu(system.K)
        u = lu.solve(system.f_rhs)
        self.solve_count += 1
        y = lu.solve(system.qoi_weights)
        self.solve_count += 1
        U = self._embed(u)
        Y = self._embed(y)
        Ex = (U[1:, :] - U[:-1, :]) * (Y[1:, :] - Y[:-1, :])
        Ey = (U[:, 1:] - U[:, :-1]) * (Y[:, 1:] - Y[:, :-1])
        D = 0.5 * (Ex[:, :-1] + Ex[:, 1:] + Ey[:-1, :] + Ey[1:, :])
        sens = self._cell_modes.T @ (a_cells * D.ravel(order="C"))
        return -self.kl_values * sens

    def model_function(self) -> ModelFunction:
        return ModelFunction(
            self.m, InputDomain(GAUSSIAN, self.m),
            eval_fn=self.solve_qoi, grad_fn=self.gradient_adjoint,
            name=f"elliptic-q{self.q}-beta{self.beta:g}", backend=self)


# ---------------------------------------------------------------------------
# registry

def build_model(spec: dict) -> ModelFunction:
    """Construct a zoo member from a configuration mapping."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("model spec must be a mapping with a 'name' key")
    spec = dict(spec)
    name = spec.pop("name")
    try:
        if name == "ridge":
            fn = make_ridge(spec.pop("a"), h=spec.pop("h", "exp"),
                            domain_kind=spec.pop("domain", "gaussian"))
        elif name == "quadratic":
            A = spec.pop("A") if "A" in spec else spec.pop("diag")
            fn = make_quadratic_form(
                A, domain_kind=spec.pop("domain", "gaussian"))
        elif name == "elliptic":
            fn = EllipticModel(q=spec.pop("q", 33),
                               beta=spec.pop("beta", 1.0),
                               m=spec.pop("m", 100),
                               cache_dir=spec.pop("cache_dir", None)
                               ).model_function()
        else:
            raise ConfigError(f"unknown model name {name!r}")
    except KeyError as exc:
        raise ConfigError(f"model spec is missing {exc}") from exc
    if spec:
        raise ConfigError(f"unknown model options: {sorted(spec)}")
    return fn
