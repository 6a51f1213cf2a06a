"""Monte Carlo surrogates over the active coordinates.

The ideal reduced-space function is the conditional expectation of the full
model given the active coordinates.  We approximate it by averaging the
model over draws of the inactive coordinates:

    Ghat(y) = (1 / N) * sum_i f(W1 y + W2 z_i),   z_i ~ conditional given y

and compose with the projection to get the full-space approximation
``Fhat(x) = Ghat(W1^T x)``.  Everything is seeded, so a fixed configuration
reproduces bit-identical values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .domain import ReducedDomain, sample_conditional_z
from .errors import ConfigError
from .serialize import write_csv


@dataclass(frozen=True)
class McSurrogateConfig:
    """Number of conditional draws per evaluation and the RNG seed."""

    N: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be an integer >= 1, got {self.N}")


def evaluate_Ghat(model, domain: ReducedDomain, y,
                  cfg: McSurrogateConfig) -> float:
    """Average the model over N conditional draws of the inactive part."""
    y = np.asarray(y, dtype=float).ravel()
    sub = domain.subspace
    zs = sample_conditional_z(domain, y, cfg.N, cfg.seed)
    base = sub.W1 @ y
    total = 0.0
    for z in zs:
        x = base + sub.W2 @ z
        try:
            total += model.eval(x)
        except Exception as exc:
            raise type(exc)(
                f"{exc} (while evaluating the model at x = {x.tolist()})"
            ) from exc
    return total / cfg.N


def evaluate_Fhat(model, domain: ReducedDomain, x,
                  cfg: McSurrogateConfig) -> float:
    """Evaluate Ghat at the active coordinates of a full-space point.

    Two points with the same active coordinates and the same config give
    identical values, since the draws depend only on ``(y, N, seed)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (domain.m,):
        raise ConfigError(f"x must have shape ({domain.m},), got {x.shape}")
    y = domain.subspace.W1.T @ x
    return evaluate_Ghat(model, domain, y, cfg)


def spawn_point_seeds(seed: int, count: int) -> np.ndarray:
    """Derive one independent child seed per point, reproducibly."""
    return np.random.SeedSequence(seed).generate_state(count)


def evaluate_Ghat_batch(model, domain: ReducedDomain, Y,
                        cfg: McSurrogateConfig) -> np.ndarray:
    """Ghat at each row of ``Y``, with per-row seeds derived from cfg.seed."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    seeds = spawn_point_seeds(cfg.seed, Y.shape[0])
    return np.array([
        evaluate_Ghat(model, domain, y, replace(cfg, seed=int(s)))
        for y, s in zip(Y, seeds)
    ])


def evaluate_Fhat_batch(model, domain: ReducedDomain, X,
                        cfg: McSurrogateConfig) -> np.ndarray:
    """Fhat at each row of ``X``, with per-row seeds derived from cfg.seed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X @ domain.subspace.W1
    return evaluate_Ghat_batch(model, domain, Y, cfg)


def save_training_csv(design: np.ndarray, values: np.ndarray, path) -> None:
    """Write design points with their surrogate training values."""
    design = np.atleast_2d(np.asarray(design, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    header = [f"y{i + 1}" for i in range(design.shape[1])] + ["value"]
    rows = np.hstack([design, values[:, None]])
    write_csv(path, header, rows)
