"""Special functions and harmonic-oscillator eigenfunctions.

Positions are measured in units of the ground-state width ``x0``, so the
oscillator Hamiltonian reads ``H = (xi**2 + p**2) / 4`` in units of
``hbar * Omega0`` and the time-independent equation is

    phi''(xi) = (xi**2 / 4 - E) * phi(xi).

Eigenfunctions are normalized with respect to ``d xi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .errors import BracketError, DomainError, GridError, NonFiniteError

HERMITE_MAX_N = 170

# internal units hbar = M = Omega0 = 1
X0 = 1.0 / math.sqrt(2.0)
K0 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class RealGrid:
    """Uniform grid of positions in units of x0."""

    points: np.ndarray
    spacing: float = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise GridError("grid needs at least two points")
        steps = np.diff(pts)
        h = float(steps.mean())
        if h <= 0 or np.any(steps <= 0):
            raise GridError("grid points must be strictly increasing")
        if np.max(np.abs(steps - h)) > 1e-12 * max(h, float(np.max(np.abs(pts)))):
            raise GridError("grid spacing is not uniform")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "spacing", h)

    @classmethod
    def symmetric(cls, extent: float, spacing: float = 1.0 / 16) -> "RealGrid":
        """Grid ``k * spacing`` for ``|k * spacing| <= extent`` (always contains 0)."""
        k = int(math.ceil(extent / spacing - 1e-9))
        return cls(spacing * np.arange(-k, k + 1, dtype=float))

    @classmethod
    def for_states(cls, n_top: int, spacing: float = 1.0 / 16, margin: float = 10.0) -> "RealGrid":
        """Default synthesis grid spanning +-(2 sqrt(n_top) + margin) x0."""
        return cls.symmetric(2.0 * math.sqrt(max(n_top, 0)) + margin, spacing)

    def __len__(self):
        return self.points.size

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.points, -self.points[::-1], rtol=0, atol=1e-12 * self.spacing))


@dataclass(frozen=True)
class EigenfunctionTable:
    n: int
    grid: RealGrid
    values: np.ndarray
    method: str
    energy: float | None = None

    def norm(self) -> float:
        return float(np.sum(self.values**2) * self.grid.spacing)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x/x0", "phi"])
            for x, v in zip(self.grid.points, self.values):
                w.writerow([f"{x:.17g}", f"{v:.17g}"])


def laguerre(n: int, alpha: float, y):
    """Generalized Laguerre polynomial ``L_n^(alpha)(y)`` by upward recurrence.

    ``y`` may be a scalar or an array; the recurrence is vectorized over it.
    """
    if n < 0:
        raise DomainError(f"Laguerre degree must be nonnegative, got {n}")
    y_arr = np.asarray(y, dtype=float)
    prev = np.ones_like(y_arr)
    if n == 0:
        out = prev
    else:
        cur = 1.0 + alpha - y_arr
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(1, n):
                prev, cur = cur, ((2 * k + 1 + alpha - y_arr) * cur - (k + alpha) * prev) / (k + 1)
        out = cur
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("Laguerre recurrence overflowed", n=n, alpha=alpha, y=y)
    return float(out) if out.ndim == 0 else out


def log_factorial_ratio(n: int, m: int) -> float:
    """``ln(n! / m!)`` via log-gamma."""
    if n == m:
        return 0.0
    return float(gammaln(n + 1.0) - gammaln(m + 1.0))


def hermite_functions(n_max: int, xi) -> np.ndarray:
    """All eigenfunctions ``phi_0 .. phi_n_max`` at positions ``xi`` (x0 units).

    Uses the normalized three-term recurrence
    ``phi_{n+1} = xi / sqrt(n+1) * phi_n - sqrt(n / (n+1)) * phi_{n-1}``,
    so no factorial is ever formed.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((n_max + 1,) + xi.shape)
    out[0] = (2.0 * math.pi) ** -0.25 * np.exp(-(xi**2) / 4.0)
    if n_max >= 1:
        out[1] = xi * out[0]
    for k in range(1, n_max):
        out[k + 1] = xi / math.sqrt(k + 1) * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def eigenfunction_hermite(n: int, grid: RealGrid) -> EigenfunctionTable:
    """Oscillator eigenfunction from the Hermite recurrence, renormalized on the grid."""
    if n > HERMITE_MAX_N:
        raise DomainError(
            f"n={n} exceeds the Hermite-formula limit {HERMITE_MAX_N}; use eigenfunction_numerov"
        )
    if n < 0:
        raise DomainError("quantum number must be nonnegative")
    pts = grid.points
    # evaluate on |x| and impose parity so the table is exactly (anti)symmetric
    vals = hermite_functions(n, np.abs(pts))[n]
    if n % 2:
        vals = np.where(pts < 0, -vals, vals)
    vals = vals / math.sqrt(np.sum(vals**2) * grid.spacing)
    vals.setflags(write=False)
    return EigenfunctionTable(n=n, grid=grid, values=vals, method="hermite-recurrence", energy=n + 0.5)


# -- Numerov shooting ------------------------------------------------------


def _numerov_out(q: np.ndarray, h: float, odd: bool) -> np.ndarray:
    """Integrate phi'' = -q phi outward from xi = 0 with definite parity."""
    psi = np.empty_like(q)
    c = 1.0 + h * h * q / 12.0
    if odd:
        psi[0] = 0.0
        psi[1] = h
    else:
        psi[0] = 1.0
        # Numerov step across the origin with psi(-h) = psi(h)
        psi[1] = (1.0 - 5.0 * h * h * q[0] / 12.0) / c[1]
    d = 2.0 - 5.0 * h * h * q / 6.0
    for i in range(1, q.size - 1):
        psi[i + 1] = (d[i] * psi[i] - c[i - 1] * psi[i - 1]) / c[i + 1]
    return psi


def _numerov_in(q: np.ndarray, h: float, start: int) -> np.ndarray:
    """Integrate inward from the last point down to index ``start`` (decaying solution)."""
    psi = np.zeros_like(q)
    last = q.size - 1
    kappa = math.sqrt(max(-q[last], 0.0))
    psi[last] = 1e-30
    psi[last - 1] = 1e-30 * math.exp(kappa * h)
    c = 1.0 + h * h * q / 12.0
    d = 2.0 - 5.0 * h * h * q / 6.0
    for i in range(last - 1, start, -1):
        psi[i - 1] = (d[i] * psi[i] - c[i + 1] * psi[i + 1]) / c[i - 1]
    return psi


def _tail_extent(x_t: float) -> float:
    # distance past the turning point where the decaying solution is ~e^-40 smaller
    ell = max(x_t / 2.0, 0.25) ** (-1.0 / 3.0)
    return max(15.3 * ell, 4.0)


def eigenfunction_numerov(
    n: int,
    grid: RealGrid,
    *,
    patch: str = "tail",
    energy_tol: float = 1e-10,
    step: float | None = None,
) -> EigenfunctionTable:
    """Eigenfunction from Numerov shooting, usable far beyond the Hermite limit.

    The equation is integrated outward from the origin with the parity of
    ``n`` and inward from deep in the forbidden region; the energy is refined
    by bisection on the Wronskian mismatch at the turning point
    ``xi_t = 2 sqrt(n + 1/2)``. Negative positions follow from parity.

    Parameters
    ----------
    patch : {"tail", "turning-point"}
        Where the Gaussian-damped exponential tail ansatz
        ``phi(a) exp[(x-a) phi'(a)/phi(a)] exp[-(x-a)^2 / 2]`` takes over.
        ``"turning-point"`` attaches it at ``a = xi_t`` (the classic recipe,
        accurate to ~1e-3); ``"tail"`` keeps the inward Numerov solution past
        the turning point and only uses the ansatz beyond the integration
        domain, where the function is below ~e^-40 of its turning-point value.
    """
    if n < 0:
        raise DomainError("quantum number must be nonnegative")
    if patch not in ("tail", "turning-point"):
        raise DomainError(f"unknown patch mode {patch!r}")
    e0 = n + 0.5
    x_t = 2.0 * math.sqrt(e0)
    x_end = x_t + _tail_extent(x_t)
    h = step if step is not None else min(1.0 / 64, 0.02 / math.sqrt(e0 + 1.0))
    xs = np.arange(0.0, x_end + h, h)
    m = int(round(x_t / h))
    odd = bool(n % 2)

    def shoot(energy):
        q = energy - xs**2 / 4.0
        out = _numerov_out(q[: m + 2], h, odd)
        inn = _numerov_in(q, h, m - 1)
        d_out = (out[m + 1] - out[m - 1]) / (2 * h)
        d_in = (inn[m + 1] - inn[m - 1]) / (2 * h)
        scale = np.max(np.abs(out[: m + 1]))
        mismatch = (d_out * inn[m] - d_in * out[m]) / (inn[m] * scale)
        return mismatch, out, inn

    lo, hi = e0 - 0.9, e0 + 0.9
    f_lo = shoot(lo)[0]
    f_hi = shoot(hi)[0]
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise BracketError("no sign change of the shooting mismatch", n=n, lo=lo, hi=hi, f_lo=f_lo, f_hi=f_hi)
    while hi - lo > energy_tol:
        mid = 0.5 * (lo + hi)
        f_mid = shoot(mid)[0]
        if f_mid == 0.0:
            lo = hi = mid
            break
        if f_mid * f_lo < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    energy = 0.5 * (lo + hi)
    _, out, inn = shoot(energy)

    psi = inn.copy()
    psi[: m + 1] = out[: m + 1] * (inn[m] / out[m])
    # stitch with the inward solution rescaled to the outward value at the seam
    sp = CubicSpline(xs, psi)

    ax = np.abs(grid.points)
    a = xs[m] if patch == "turning-point" else xs[-1]
    vals = np.empty_like(ax)
    inside = ax <= a
    vals[inside] = sp(ax[inside])
    phi_a = float(sp(a))
    dphi_a = float(sp(a, 1))
    beyond = ~inside
    if np.any(beyond):
        dx = ax[beyond] - a
        with np.errstate(under="ignore"):
            vals[beyond] = phi_a * np.exp(dx * dphi_a / phi_a) * np.exp(-(dx**2) / 2.0)
    if odd:
        vals = np.where(grid.points < 0, -vals, vals)
    norm = math.sqrt(np.sum(vals**2) * grid.spacing)
    if not np.isfinite(norm) or norm == 0:
        raise NonFiniteError("eigenfunction normalization failed", n=n)
    vals = vals / norm
    vals.setflags(write=False)
    return EigenfunctionTable(n=n, grid=grid, values=vals, method="numerov-patched", energy=energy)


def eigenfunction(n: int, grid: RealGrid) -> EigenfunctionTable:
    """Hermite recurrence up to the analytic limit, Numerov shooting above it."""
    if n <= HERMITE_MAX_N:
        return eigenfunction_hermite(n, grid)
    return eigenfunction_numerov(n, grid)


def eigenfunction_matrix(ns, grid: RealGrid) -> np.ndarray:
    """Rows ``phi_n`` on the grid for each n in ``ns`` (renormalized on the grid)."""
    ns = [int(v) for v in ns]
    rows = np.empty((len(ns), len(grid)))
    low = [n for n in ns if n <= HERMITE_MAX_N]
    table = None
    if low:
        pts = grid.points
        table = hermite_functions(max(low), np.abs(pts))
    for i, n in enumerate(ns):
        if n <= HERMITE_MAX_N:
            v = table[n]
            if n % 2:
                v = np.where(grid.points < 0, -v, v)
            rows[i] = v / math.sqrt(np.sum(v**2) * grid.spacing)
        else:
            rows[i] = eigenfunction_numerov(n, grid).values
    return rows
