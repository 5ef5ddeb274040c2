"""The Gaussian process limiting the normalized generation counts.

The order-k limit is the (k-1)-fold time integral of a Brownian motion,
R_k(s) = int_0^s (s-y)^{k-1} dB(y), a Riemann-Liouville type process. Its
cross covariances have a closed binomial form; an adaptive-quadrature
evaluation of the defining integral serves as an independent oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import FactorizationError
from .rng import RngStream

_JITTER_STEPS = (0.0, 1e-12, 1e-11, 1e-10)


@dataclass(frozen=True)
class CovMatrix:
    """Covariance over the flat index set [(k, t) for k in 1..k_max for t in t_grid]."""

    index: tuple[tuple[int, float], ...]
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class GaussianGridSample:
    """Draws from the limit on a (k, t) index set, one row per replicate."""

    index: tuple[tuple[int, float], ...]
    samples: np.ndarray
    jitter: float  # diagonal jitter the factorization needed (0 when clean)


def cov_rkl(k: int, l: int, s: float, u: float) -> float:
    """Closed-form E R_k(s) R_l(u).

    Equals int_0^{min(s,u)} (s-y)^{k-1} (u-y)^{l-1} dy; for u >= s this is
    sum_j C(l-1, j) s^{k+j} (u-s)^{l-1-j} / (k+j).
    """
    if k < 1 or l < 1:
        raise ValueError("orders must be >= 1")
    if s < 0 or u < 0:
        raise ValueError("times must be >= 0")
    if u < s:
        k, l, s, u = l, k, u, s
    if s == 0:
        return 0.0
    return math.fsum(
        math.comb(l - 1, j) / (k + j) * s ** (k + j) * (u - s) ** (l - 1 - j)
        for j in range(l)
    )


def cov_rkl_integral(k: int, l: int, s: float, u: float) -> float:
    """Quadrature oracle for cov_rkl from the defining integral."""
    if k < 1 or l < 1:
        raise ValueError("orders must be >= 1")
    if s < 0 or u < 0:
        raise ValueError("times must be >= 0")
    top = min(s, u)
    if top == 0:
        return 0.0
    val, _ = quad(
        lambda y: (s - y) ** (k - 1) * (u - y) ** (l - 1),
        0.0,
        top,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    return float(val)


def marginal_sd(k: int, s: float) -> float:
    """Standard deviation of R_k(s): sqrt(s^{2k-1} / (2k-1))."""
    if k < 1:
        raise ValueError("order must be >= 1")
    if s < 0:
        raise ValueError("time must be >= 0")
    return math.sqrt(s ** (2 * k - 1) / (2 * k - 1))


def build_cov_matrix(k_max: int, t_grid) -> CovMatrix:
    """Covariance over the product index set, k-major then time."""
    t_grid = [float(t) for t in np.atleast_1d(np.asarray(t_grid, dtype=float))]
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not t_grid:
        raise ValueError("t_grid must be nonempty")
    if any(t < 0 for t in t_grid):
        raise ValueError("t_grid entries must be >= 0")
    index = tuple((k, t) for k in range(1, k_max + 1) for t in t_grid)
    d = len(index)
    mat = np.empty((d, d))
    for a, (k, s) in enumerate(index):
        for b, (l, u) in enumerate(index):
            if b < a:
                mat[a, b] = mat[b, a]
            else:
                mat[a, b] = cov_rkl(k, l, s, u)
    return CovMatrix(index, mat)


def _factor(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    maxdiag = float(np.max(np.diag(matrix))) if matrix.size else 0.0
    scale = max(maxdiag, 1e-300)
    for step in _JITTER_STEPS:
        eps = step * scale
        try:
            L = np.linalg.cholesky(matrix + eps * np.eye(matrix.shape[0]))
            return L, eps
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError("covariance not factorizable within the jitter policy")


def sample_limit(cov: CovMatrix, n_samples: int, rng: RngStream) -> GaussianGridSample:
    """Exact joint draws of the limit at the covariance's index set.

    Uses a lower-triangular factor; if the matrix is numerically
    semidefinite, an escalating diagonal jitter up to 1e-10 of the largest
    diagonal entry is applied and reported.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    L, eps = _factor(cov.matrix)
    z = rng.gen.standard_normal((n_samples, cov.dim))
    return GaussianGridSample(cov.index, z @ L.T, eps)
