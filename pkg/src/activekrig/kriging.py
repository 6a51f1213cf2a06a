"""Kriging response surfaces on the reduced coordinates.

The kernel is a product of squared exponentials with one length per active
direction.  Rather than fitting every length separately, the lengths and the
noise floor are tied to the estimated eigenvalues through a single scale
factor ``alpha``:

    sigma2 = alpha * (lam_1 + ... + lam_m)
    len_i  = sqrt(sigma2 / lam_i)            for the retained directions
    eta2   = alpha * (lam_{n+1} + ... + lam_m)

so directions the function cares about get short correlation lengths and the
discarded eigenvalue mass reappears as observation noise.  ``alpha`` is
chosen by maximizing the concentrated log marginal likelihood over a bracket
whose lower end is the observed value variance over the total eigenvalue
mass and whose upper end is the Poincare constant of the input density.

The kernel matrix is stored with unit amplitude and the data covariance is
``sigma2 * K + eta2 * I``, so every internal solve works on the correlation
scale with the noise-to-amplitude ratio ``eta2 / sigma2`` on the diagonal;
mean coefficients and prediction weights are invariant to the common factor,
and predictive variances are scaled back by ``sigma2``.  That convention is
recorded on the model as ``kernel_scaling = "unit"``.

The mean surface is a full quadratic in the active coordinates, with
coefficients profiled out by generalized least squares.  A two-parameter
isotropic variant (one shared length, one noise level, standard bounded MLE)
is provided for full-space and coordinate-aligned baseline comparisons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .domain import InputDomain
from .errors import (
    ConditioningError,
    ConfigError,
    DegenerateDirectionError,
    DegenerateSubspaceError,
    NonPoisedDesignError,
)
from .serialize import read_json, write_json

GOLDEN_RELATIVE_TOL = 1e-4
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KrigingHyperparameters:
    """Kernel lengths, noise level, and the scale factor that produced them.

    ``eta2`` and ``sigma2`` are absolute variances.  ``alpha`` is None for
    models fit by the generic isotropic MLE, which profiles the amplitude
    directly instead of going through the eigenvalue heuristic.
    """

    lengths: np.ndarray
    eta2: float
    alpha: float | None = None
    sigma2: float | None = None

    @property
    def noise_ratio(self) -> float:
        """Noise variance relative to the kernel amplitude."""
        return self.eta2 / (1.0 if self.sigma2 is None else self.sigma2)

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float)
        if lengths.ndim != 1 or np.any(lengths <= 0):
            raise ConfigError("lengths must be a vector of positive values")
        object.__setattr__(self, "lengths", lengths)
        if self.eta2 < 0:
            raise ConfigError(f"eta2 must be nonnegative, got {self.eta2}")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.sigma2 is not None and self.sigma2 <= 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")


def hyperparameters_from_eigenvalues(eigenvalues, n: int,
                                     alpha: float) -> KrigingHyperparameters:
    """Tie kernel lengths and noise to the eigenvalue spectrum via alpha."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.ndim != 1 or ev.size < 2:
        raise ConfigError("eigenvalues must be a vector of length >= 2")
    if np.any(np.diff(ev) > 1e-12 * max(ev[0], 1.0)):
        raise ConfigError("eigenvalues must be in descending order")
    if np.any(ev < -1e-12):
        raise ConfigError("eigenvalues must be nonnegative")
    ev = np.maximum(ev, 0.0)
    if not (1 <= n < ev.size):
        raise ConfigError(f"n must satisfy 1 <= n < m, got {n}")
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if np.any(ev[:n] == 0.0):
        bad = int(np.nonzero(ev[:n] == 0.0)[0][0])
        raise DegenerateDirectionError(
            f"retained direction {bad} has zero eigenvalue; its correlation "
            f"length would be infinite"
        )
    sigma2 = float(alpha * np.sum(ev))
    lengths = np.sqrt(sigma2 / ev[:n])
    eta2 = float(alpha * np.sum(ev[n:]))
    return KrigingHyperparameters(lengths=lengths, eta2=eta2,
                                  alpha=float(alpha), sigma2=sigma2)


def kernel(y1, y2, lengths) -> float:
    """Unit-amplitude product squared-exponential correlation."""
    y1 = np.asarray(y1, dtype=float).ravel()
    y2 = np.asarray(y2, dtype=float).ravel()
    lengths = np.asarray(lengths, dtype=float).ravel()
    if y1.shape != y2.shape or y1.shape != lengths.shape:
        raise ConfigError("y1, y2 and lengths must share one shape")
    d = (y1 - y2) / lengths
    return float(np.exp(-0.5 * np.dot(d, d)))


def kernel_matrix(Y1, Y2, lengths) -> np.ndarray:
    """Correlation matrix between two point sets, rows as points."""
    Y1 = np.atleast_2d(np.asarray(Y1, dtype=float)) / lengths
    Y2 = np.atleast_2d(np.asarray(Y2, dtype=float)) / lengths
    sq = (np.sum(Y1 * Y1, axis=1)[:, None]
          + np.sum(Y2 * Y2, axis=1)[None, :] - 2.0 * (Y1 @ Y2.T))
    return np.exp(-0.5 * np.maximum(sq, 0.0))


def polynomial_basis(Y, degree: int) -> np.ndarray:
    """Monomial basis columns in graded lexicographic order.

    Degree 2 with n = 2 gives ``1, y1, y2, y1^2, y1*y2, y2^2``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[1]
    cols = [np.ones(Y.shape[0])]
    cols.extend(Y[:, i] for i in range(n))
    if degree == 2:
        for i in range(n):
            for j in range(i, n):
                cols.append(Y[:, i] * Y[:, j])
    elif degree != 1:
        raise ConfigError(f"degree must be 1 or 2, got {degree}")
    return np.stack(cols, axis=1)


def basis_size(n: int, degree: int) -> int:
    return 1 + n + (n * (n + 1)) // 2 * (degree == 2)


def alpha_bracket(sigma_hat2: float, eigenvalues,
                  domain: InputDomain) -> tuple[float, float]:
    """Search bracket for alpha: variance ratio up to the Poincare constant.

    If the observed variance already exceeds what the Poincare constant
    allows, the bracket collapses to the upper end with a warning.
    """
    if sigma_hat2 < 0:
        raise ConfigError(f"sigma_hat2 must be nonnegative, got {sigma_hat2}")
    total = float(np.sum(np.asarray(eigenvalues, dtype=float)))
    if total <= 0:
        raise DegenerateSubspaceError(
            "eigenvalues sum to zero; alpha bracket is undefined"
        )
    lower = sigma_hat2 / total
    upper = domain.poincare_constant()
    if lower > upper:
        warnings.warn(
            f"alpha bracket lower end {lower:.4g} exceeds the Poincare "
            f"constant {upper:.4g}; pinning alpha at the constant",
            RuntimeWarning, stacklevel=2)
        return upper, upper
    return lower, upper


def _factor_covariance(K: np.ndarray, nugget: float):
    """Cholesky of K + nugget I with the diagonal-boost retry policy.

    Returns the factor and the jitter that was applied.  Each retry adds
    ``1e-10 * trace(K) / P`` to the diagonal, at most three times.
    """
    P = K.shape[0]
    base = 1e-10 * np.trace(K) / P
    A = K + nugget * np.eye(P)
    jitter = 0.0
    for attempt in range(4):
        try:
            L = cho_factor(A + jitter * np.eye(P), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter += base
    raise ConditioningError(
        f"covariance factorization failed after 3 diagonal boosts; "
        f"suggested jitter >= {10.0 * base:.3e}"
    )


def _gls_profile(K: np.ndarray, nugget: float, H: np.ndarray,
                 g: np.ndarray, jitter: float | None = None):
    """Profile the mean coefficients on the correlation scale.

    ``nugget`` is the noise-to-amplitude ratio.  Returns the coefficients,
    the prediction weights, the residual quadratic form and log determinant
    (both on the correlation scale, for the caller's likelihood), and the
    jitter that was applied.
    """
    P = K.shape[0]
    if jitter is None:
        L, jitter = _factor_covariance(K, nugget)
    else:
        L = cho_factor(K + (nugget + jitter) * np.eye(P), lower=True)
    Ainv_H = cho_solve(L, H)
    Ainv_g = cho_solve(L, g)
    C = H.T @ Ainv_H
    try:
        beta = np.linalg.solve(C, H.T @ Ainv_g)
    except np.linalg.LinAlgError as exc:
        raise NonPoisedDesignError(
            "normal equations for the mean surface are singular; the design "
            "cannot support the requested polynomial mean"
        ) from exc
    resid = g - H @ beta
    weights = cho_solve(L, resid)
    quad = float(resid @ weights)
    logdet = 2.0 * np.sum(np.log(np.diag(L[0])))
    return beta, weights, quad, logdet, jitter


def log_marginal_likelihood(design, training, eigenvalues, n: int,
                            alpha: float) -> float:
    """Concentrated log likelihood of the data as a function of alpha.

    The covariance is ``sigma2 * K + eta2 * I`` with both variances tied to
    alpha, so the amplitude contributes ``P log sigma2`` alongside the
    correlation-scale determinant.
    """
    Y = np.atleast_2d(np.asarray(design, dtype=float))
    g = np.asarray(training, dtype=float).ravel()
    P = Y.shape[0]
    hyper = hyperparameters_from_eigenvalues(eigenvalues, n, alpha)
    K = kernel_matrix(Y, Y, hyper.lengths)
    H = polynomial_basis(Y, degree=2)
    _, _, quad, logdet, _ = _gls_profile(K, hyper.noise_ratio, H, g)
    return (-0.5 * quad / hyper.sigma2 - 0.5 * logdet
            - 0.5 * P * np.log(hyper.sigma2)
            - 0.5 * P * np.log(2.0 * np.pi))


def _golden_section_max(fn, lo: float, hi: float,
                        rel_tol: float = GOLDEN_RELATIVE_TOL) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > rel_tol * max(abs(a), abs(b), 1e-300):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


@dataclass
class KrigingModel:
    """A fitted universal kriging surface on the reduced coordinates.

    Carries the design, training values, hyperparameters, profiled mean
    coefficients, and prediction weights.  Covariance factors are rebuilt
    deterministically from the stored fields, so a serialized model
    reproduces its predictions exactly.
    """

    design: np.ndarray
    training: np.ndarray
    hyper: KrigingHyperparameters
    beta: np.ndarray
    weights: np.ndarray
    n: int
    basis_degree: int
    jitter: float
    eigenvalues: np.ndarray | None = None
    kernel_scaling: str = "unit"
    _L: tuple = field(init=False, repr=False)
    _C_factor: tuple = field(init=False, repr=False)
    _H: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.training = np.asarray(self.training, dtype=float).ravel()
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.eigenvalues is not None:
            self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        P = self.design.shape[0]
        if self.training.shape != (P,) or self.weights.shape != (P,):
            raise ConfigError("training and weights must have one entry per "
                              "design point")
        K = kernel_matrix(self.design, self.design, self.hyper.lengths)
        self._H = polynomial_basis(self.design, self.basis_degree)
        if self.beta.shape != (self._H.shape[1],):
            raise ConfigError("beta length does not match the basis size")
        self._L = cho_factor(
            K + (self.hyper.noise_ratio + self.jitter) * np.eye(P),
            lower=True)
        C = self._H.T @ cho_solve(self._L, self._H)
        self._C_factor = cho_factor(C, lower=True)

    @property
    def P(self) -> int:
        return self.design.shape[0]

    def predict_batch(self, Y) -> tuple[np.ndarray, np.ndarray]:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.design.shape[1]:
            raise ConfigError(
                f"points must have {self.design.shape[1]} columns, got "
                f"{Y.shape[1]}")
        Ks = kernel_matrix(Y, self.design, self.hyper.lengths)
        Hs = polynomial_basis(Y, self.basis_degree)
        mean = Hs @ self.beta + Ks @ self.weights
        V = cho_solve(self._L, Ks.T)
        U = Hs.T - self._H.T @ V
        amp = 1.0 if self.hyper.sigma2 is None else self.hyper.sigma2
        var = amp * (1.0 - np.einsum("qp,pq->q", Ks, V)
                     + np.einsum("iq,iq->q", U,
                                 cho_solve(self._C_factor, U)))
        return mean, np.maximum(var, 0.0)


def fit(design, training, eigenvalues, n: int, sigma_hat2: float,
        domain: InputDomain, c1: float | None = None) -> KrigingModel:
    """Fit the eigenvalue-tied kriging surface, choosing alpha by MLE.

    The single free scale ``alpha`` is maximized over the bracket from
    :func:`alpha_bracket` with a golden-section search at relative
    tolerance 1e-4.  ``c1`` overrides the bracket's upper end.
    """
    Y = np.atleast_2d(np.asarray(design, dtype=float))
    g = np.asarray(training, dtype=float).ravel()
    P = Y.shape[0]
    if g.shape != (P,):
        raise ConfigError(f"training must have {P} values, got {g.shape}")
    if not np.all(np.isfinite(Y)) or not np.all(np.isfinite(g)):
        raise ConfigError("design and training values must be finite")
    if Y.shape[1] != n:
        raise ConfigError(f"design has {Y.shape[1]} columns but n = {n}")
    nb = basis_size(n, 2)
    if P < nb:
        raise NonPoisedDesignError(
            f"quadratic mean needs at least {nb} points, got {P}"
        )
    H = polynomial_basis(Y, degree=2)
    if np.linalg.matrix_rank(H) < nb:
        raise NonPoisedDesignError(
            "design is not poised for a quadratic mean surface"
        )
    lo, hi = alpha_bracket(sigma_hat2, eigenvalues, domain)
    if c1 is not None:
        if c1 <= 0:
            raise ConfigError(f"c1 must be positive, got {c1}")
        hi = c1
        lo = min(lo, hi)
    lo = max(lo, 1e-8 * hi)
    if hi - lo <= GOLDEN_RELATIVE_TOL * hi:
        alpha = hi
    else:
        def objective(a):
            return log_marginal_likelihood(Y, g, eigenvalues, n, a)

        alpha = _golden_section_max(objective, lo, hi)
    hyper = hyperparameters_from_eigenvalues(eigenvalues, n, alpha)
    K = kernel_matrix(Y, Y, hyper.lengths)
    beta, weights, _, _, jitter = _gls_profile(K, hyper.noise_ratio, H, g)
    return KrigingModel(design=Y, training=g, hyper=hyper, beta=beta,
                        weights=weights, n=n, basis_degree=2, jitter=jitter,
                        eigenvalues=np.asarray(eigenvalues, dtype=float))


def fit_isotropic(design, training, basis_degree: int = 2,
                  max_evals: int = 200) -> KrigingModel:
    """Generic kriging fit: shared length and noise ratio by MLE.

    This is the standard-toolkit treatment used by the baseline
    comparisons.  The amplitude is profiled out of the likelihood; the
    search over the remaining two parameters is a coarse log-space grid
    followed by a bounded quasi-Newton refinement, all deterministic.
    """
    Y = np.atleast_2d(np.asarray(design, dtype=float))
    g = np.asarray(training, dtype=float).ravel()
    P, dim = Y.shape
    nb = basis_size(dim, basis_degree)
    if P < nb:
        raise NonPoisedDesignError(
            f"degree-{basis_degree} mean needs at least {nb} points, got {P}"
        )
    H = polynomial_basis(Y, basis_degree)
    if np.linalg.matrix_rank(H) < nb:
        raise NonPoisedDesignError(
            f"design is not poised for a degree-{basis_degree} mean surface"
        )
    span = float(np.max(np.ptp(Y, axis=0)))
    if span <= 0:
        raise ConfigError("design points are all identical")
    # Lengths beyond the design span are unidentifiable, and noise beyond
    # the kernel amplitude never helps; the amplitude itself is profiled
    # out of the likelihood, leaving a two-parameter search.
    gvar = max(float(np.var(g)), 1e-12)
    lo = np.log([2e-2 * span, 1e-9])
    hi = np.log([span, 1.0])
    P_log2pi = P * (1.0 + np.log(2.0 * np.pi))

    def neg_loglik(u):
        length, nu = np.exp(u)
        K = kernel_matrix(Y, Y, np.full(dim, length))
        try:
            _, _, quad, logdet, _ = _gls_profile(K, nu, H, g)
        except (ConditioningError, np.linalg.LinAlgError):
            return 1e12
        s2 = max(quad / P, 1e-18 * gvar)
        return 0.5 * (P * np.log(s2) + logdet + P_log2pi)

    grid = [np.array([ul, ue])
            for ul in np.linspace(lo[0], hi[0], 7)
            for ue in np.linspace(lo[1], hi[1], 5)]
    grid_vals = [neg_loglik(u) for u in grid]
    best = grid[int(np.argmin(grid_vals))]
    best_val = min(grid_vals)
    res = minimize(neg_loglik, best, method="L-BFGS-B",
                   bounds=list(zip(lo, hi)),
                   options={"maxfun": max_evals})
    length, nu = np.exp(res.x if res.fun <= best_val else best)
    K = kernel_matrix(Y, Y, np.full(dim, length))
    beta, weights, quad, _, jitter = _gls_profile(K, nu, H, g)
    s2 = max(quad / P, 1e-18 * gvar)
    hyper = KrigingHyperparameters(lengths=np.full(dim, length),
                                   eta2=nu * s2, sigma2=s2)
    return KrigingModel(design=Y, training=g, hyper=hyper, beta=beta,
                        weights=weights, n=dim, basis_degree=basis_degree,
                        jitter=jitter, eigenvalues=None)


def predict(model: KrigingModel, y) -> tuple[float, float]:
    """Posterior mean and (clamped nonnegative) variance at one point."""
    mean, var = model.predict_batch(np.atleast_2d(np.asarray(y, float)))
    return float(mean[0]), float(var[0])


# ---------------------------------------------------------------------------
# serialization

_FORMAT = "kriging-model-v1"


def model_to_dict(model: KrigingModel) -> dict:
    return {
        "format": _FORMAT,
        "design": [[float(v) for v in row] for row in model.design],
        "training": [float(v) for v in model.training],
        "n": model.n,
        "basis_degree": model.basis_degree,
        "beta": [float(v) for v in model.beta],
        "weights": [float(v) for v in model.weights],
        "lengths": [float(v) for v in model.hyper.lengths],
        "eta2": float(model.hyper.eta2),
        "alpha": (None if model.hyper.alpha is None
                  else float(model.hyper.alpha)),
        "sigma2": (None if model.hyper.sigma2 is None
                   else float(model.hyper.sigma2)),
        "jitter": float(model.jitter),
        "eigenvalues": (None if model.eigenvalues is None
                        else [float(v) for v in model.eigenvalues]),
        "kernel_scaling": model.kernel_scaling,
    }


def model_from_dict(d: dict) -> KrigingModel:
    try:
        if d.get("format") != _FORMAT:
            raise ConfigError(
                f"unknown kriging model format {d.get('format')!r}")
        hyper = KrigingHyperparameters(
            lengths=np.asarray(d["lengths"], dtype=float),
            eta2=float(d["eta2"]),
            alpha=None if d["alpha"] is None else float(d["alpha"]),
            sigma2=None if d["sigma2"] is None else float(d["sigma2"]))
        ev = d.get("eigenvalues")
        return KrigingModel(
            design=np.asarray(d["design"], dtype=float),
            training=np.asarray(d["training"], dtype=float),
            hyper=hyper,
            beta=np.asarray(d["beta"], dtype=float),
            weights=np.asarray(d["weights"], dtype=float),
            n=int(d["n"]),
            basis_degree=int(d["basis_degree"]),
            jitter=float(d["jitter"]),
            eigenvalues=None if ev is None else np.asarray(ev, dtype=float),
            kernel_scaling=str(d.get("kernel_scaling", "unit")))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed kriging model record: {exc}") from exc


def save_model_json(model: KrigingModel, path) -> None:
    write_json(path, model_to_dict(model))


def load_model_json(path) -> KrigingModel:
    return model_from_dict(read_json(path))
