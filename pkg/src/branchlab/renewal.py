"""Grid-based renewal functions and the deviation bounds around them.

U(t) counts expected first-generation events of the walk by time t and
solves U = F + U * dF. The solver discretizes mass into grid cells, places
each cell's mass at its conditional mean, and reads U there by linear
interpolation. That keeps the recursion explicit and monotone, is exact to
rounding for exponential increments, and reproduces floor(t/d) exactly for
the lattice law det(d) because atoms land on grid nodes (the grid step must
divide d). Higher-order counts U_k come from Stieltjes convolution against
the increments of U.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .distributions import IncrementDistribution, lorden_constant
from .errors import TableCoverageError
from .rng import RngStream

MAX_GRID_CELLS = 10**7
_DIRECT_CONV_LIMIT = 16384


@dataclass(frozen=True)
class RenewalTable:
    """Uniform-grid values of U, U_2, ..., U_{k_max}; immutable once built."""

    dist: IncrementDistribution
    h: float
    uk: np.ndarray  # shape (k_max, n_cells + 1); row k-1 holds U_k on the grid
    mu: float
    c: float  # usable deviation-band constant, >= 1

    @property
    def k_max(self) -> int:
        return int(self.uk.shape[0])

    @property
    def n_cells(self) -> int:
        return int(self.uk.shape[1]) - 1

    @property
    def tmax(self) -> float:
        return self.n_cells * self.h

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.uk.shape[1]) * self.h

    def _row(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.k_max:
            raise TableCoverageError(f"table holds orders 1..{self.k_max}, requested {k}")
        return self.uk[k - 1]

    def interp(self, k: int, t) -> np.ndarray | float:
        """Linearly interpolated U_k(t); 0 for t < 0, error beyond the grid."""
        row = self._row(k)
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr > self.tmax + 1e-9 * max(1.0, self.tmax)):
            raise TableCoverageError(f"requested time beyond table horizon {self.tmax}")
        out = np.interp(np.maximum(t_arr, 0.0), self.grid, row)
        out = np.where(t_arr < 0, 0.0, out)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def integral(self, k: int, t: float) -> float:
        """Trapezoid integral of U_k over [0, t], with a partial last cell."""
        row = self._row(k)
        if t < 0:
            return 0.0
        if t > self.tmax + 1e-9 * max(1.0, self.tmax):
            raise TableCoverageError(f"requested time beyond table horizon {self.tmax}")
        i = min(int(math.floor(t / self.h + 1e-12)), self.n_cells)
        full = 0.0
        if i >= 1:
            full = self.h * (0.5 * row[0] + float(np.sum(row[1:i])) + 0.5 * row[i])
        rem = t - i * self.h
        if rem > 0:
            full += 0.5 * (row[i] + self.interp(k, t)) * rem
        return full


def _volterra_u(dist: IncrementDistribution, n_cells: int, h: float) -> np.ndarray:
    edges = np.arange(n_cells + 1) * h
    Fe = np.asarray(dist.cdf(edges), dtype=float)
    Pe = np.asarray(dist.partial_mean(edges), dtype=float)
    dF = np.diff(Fe)
    dP = np.diff(Pe)
    mid = 0.5 * (edges[:-1] + edges[1:])
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(dF > 0, dP / np.where(dF > 0, dF, 1.0), mid)
    m = np.clip(m, edges[:-1], edges[1:])
    theta = np.clip((edges[1:] - m) / h, 0.0, 1.0)
    a = dF * (1.0 - theta)
    b = dF * theta
    denom = 1.0 - b[0]
    wlag = a.copy()
    wlag[:-1] += b[1:]
    # reversed weights keep both dot operands contiguous inside the loop
    wrev = np.ascontiguousarray(wlag[::-1])
    U = np.empty(n_cells + 1)
    U[0] = Fe[0] / denom
    for i in range(1, n_cells + 1):
        U[i] = (Fe[i] + np.dot(wrev[n_cells - i :], U[:i])) / denom
    return U


def renewal_function_grid(
    dist: IncrementDistribution,
    t_max: float,
    h: float = 0.01,
    max_cells: int = MAX_GRID_CELLS,
) -> RenewalTable:
    """Solve for U on the grid 0, h, ..., ceil(t_max/h)*h."""
    if h <= 0:
        raise ValueError("grid step h must be positive")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    n_cells = int(math.ceil(t_max / h - 1e-9))
    if n_cells > max_cells:
        raise ValueError(f"grid of {n_cells} cells exceeds the cap {max_cells}")
    if dist.lattice_span > 0:
        ratio = dist.lattice_span / h
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("grid step must divide the lattice span")
    U = _volterra_u(dist, n_cells, h)
    return RenewalTable(dist, h, U[np.newaxis, :].copy(), dist.mu, lorden_constant(dist))


def _convolve_next(prev: np.ndarray, dU: np.ndarray, lattice: bool) -> np.ndarray:
    n = dU.shape[0]
    kernel = prev[:n] if lattice else 0.5 * (prev[:-1] + prev[1:])
    if n <= _DIRECT_CONV_LIMIT:
        conv = np.convolve(kernel, dU)
    else:
        conv = fftconvolve(kernel, dU)
    out = np.empty(n + 1)
    out[0] = 0.0
    out[1:] = conv[:n]
    return out


def higher_renewal_grid(table: RenewalTable, k_max: int) -> RenewalTable:
    """Extend a table with U_2..U_{k_max} by grid Stieltjes convolution.

    Nonlattice laws evaluate the lower-order function at cell midpoints;
    lattice laws evaluate at the right endpoint where the atoms sit.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if k_max <= table.k_max:
        return table
    lattice = table.dist.lattice_span > 0
    dU = np.diff(table.uk[0])
    rows = [table.uk[i] for i in range(table.k_max)]
    for _ in range(table.k_max + 1, k_max + 1):
        rows.append(_convolve_next(rows[-1], dU, lattice))
    return RenewalTable(table.dist, table.h, np.vstack(rows), table.mu, table.c)


def build_renewal_table(
    dist: IncrementDistribution, t_max: float, h: float = 0.01, k_max: int = 1
) -> RenewalTable:
    """Convenience: solve for U and extend to k_max in one call."""
    return higher_renewal_grid(renewal_function_grid(dist, t_max, h), k_max)


def lorden_check(table: RenewalTable) -> tuple[float, float]:
    """(min, max) over the grid of U(t) - t/mu."""
    dev = table.uk[0] - table.grid / table.mu
    return float(dev.min()), float(dev.max())


def uk_deviation_bound(table: RenewalTable, k: int) -> np.ndarray:
    """Pointwise bound on |U_k(t) - t^k/(k! mu^k)| built from the band constant c."""
    t = table.grid
    total = np.zeros_like(t)
    for i in range(k):
        total += (
            math.comb(k, i)
            * t**i
            * table.c ** (k - i)
            / (math.factorial(i) * table.mu**i)
        )
    return total


def uk_bound_check(table: RenewalTable, k: int) -> float:
    """Worst slack of the deviation bound: max over the grid of |dev| - bound.

    Negative everywhere (up to discretization tolerance) confirms the bound
    numerically.
    """
    row = table._row(k)
    t = table.grid
    poly = t**k / (math.factorial(k) * table.mu**k)
    slack = np.abs(row - poly) - uk_deviation_bound(table, k)
    return float(slack.max())


def stieltjes_integral(table: RenewalTable, integrand, t: float) -> float:
    """Integral of integrand(t - y) against dU(y) over [0, t] on the grid.

    integrand must accept a vector of nonnegative times. Nonlattice laws
    use cell-midpoint evaluation, lattice laws the right endpoint.
    """
    if t < 0:
        return 0.0
    if t > table.tmax + 1e-9 * max(1.0, table.tmax):
        raise TableCoverageError(f"requested time beyond table horizon {table.tmax}")
    h = table.h
    U = table.uk[0]
    i = min(int(math.floor(t / h + 1e-12)), table.n_cells)
    lattice = table.dist.lattice_span > 0
    total = 0.0
    if i >= 1:
        j = np.arange(1, i + 1)
        y = j * h if lattice else (j - 0.5) * h
        masses = np.diff(U[: i + 1])
        total += float(np.dot(np.asarray(integrand(t - y), dtype=float), masses))
    rem = t - i * h
    if rem > 0:
        mass = float(table.interp(1, t)) - float(U[i])
        if mass != 0.0:
            y_mid = i * h + (rem if lattice else 0.5 * rem)
            total += float(integrand(np.array([t - y_mid]))[0]) * mass
    return total


def second_moment_rhs(table: RenewalTable, k: int, t: float) -> float:
    """Closed-form second moment of the shot-noise sum over first-generation
    birth times: 2 int U_{k-1}(t-y) U_k(t-y) dU(y) + int U_{k-1}(t-y)^2 dU(y).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if table.k_max < k:
        raise TableCoverageError(f"table must hold orders up to {k}")

    def integrand(x):
        a = table.interp(k - 1, x)
        b = table.interp(k, x)
        return 2.0 * a * b + a * a

    return stieltjes_integral(table, integrand, t)


def yk3_exact(table: RenewalTable, k: int, t: float) -> float:
    """Deterministic drift term: mu^{-1} int_0^t U_{k-1} - t^k/(k! mu^k)."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if table.k_max < k - 1:
        raise TableCoverageError(f"table must hold orders up to {k - 1}")
    return table.integral(k - 1, t) / table.mu - t**k / (math.factorial(k) * table.mu**k)


def abs_normal_moment(p: float, variance: float) -> float:
    """E|Z|^p for Z ~ normal(0, variance)."""
    return variance ** (p / 2.0) * 2 ** (p / 2.0) * math.gamma((p + 1) / 2.0) / math.sqrt(math.pi)


def moment_ratio(
    dist: IncrementDistribution,
    t: float,
    p: float,
    n_samples: int,
    rng: RngStream,
    table: RenewalTable | None = None,
) -> float:
    """Monte Carlo E|N(t) - U(t)|^p over its Gaussian prediction.

    The prediction is E|Z|^p * t^{p/2} with Z ~ normal(0, sigma2 / mu^3).
    U(t) comes from the closed form for exp, or from the supplied table.
    """
    from .cmj import renewal_count_samples

    if dist.sigma2 <= 0:
        raise ValueError("degenerate increments have no Gaussian limit")
    if p < 1:
        raise ValueError("p must be >= 1")
    if table is not None:
        u_t = float(table.interp(1, t))
    elif dist.kind == "exp":
        u_t = dist.params[0] * t
    else:
        raise ValueError("a renewal table is required for this law")
    counts = renewal_count_samples(dist, t, n_samples, rng)
    num = float(np.mean(np.abs(counts - u_t) ** p))
    den = abs_normal_moment(p, dist.sigma2 / dist.mu**3) * t ** (p / 2.0)
    return num / den


def table_to_csv_rows(table: RenewalTable):
    """Yield header + rows for the t,U,U2,...,Uk CSV layout."""
    header = ["t", "U"] + [f"U{k}" for k in range(2, table.k_max + 1)]
    yield header
    grid = table.grid
    for i in range(grid.shape[0]):
        yield [grid[i]] + [table.uk[k, i] for k in range(table.k_max)]


def table_from_csv(path: str, dist: IncrementDistribution) -> RenewalTable:
    """Rebuild a table from the t,U,U2,... CSV layout."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    data = np.atleast_2d(data)
    grid = data[:, 0]
    if grid.shape[0] < 2:
        raise ValueError("table CSV must hold at least two grid points")
    steps = np.diff(grid)
    h = float(steps[0])
    if not np.allclose(steps, h, rtol=0, atol=1e-9 * max(1.0, h)):
        raise ValueError("table CSV grid must be uniform")
    if abs(grid[0]) > 1e-12:
        raise ValueError("table CSV grid must start at 0")
    uk = np.ascontiguousarray(data[:, 1:].T)
    if np.any(np.diff(uk, axis=1) < -1e-9):
        raise ValueError("table CSV rows must be nondecreasing")
    return RenewalTable(dist, h, uk, dist.mu, lorden_constant(dist))
