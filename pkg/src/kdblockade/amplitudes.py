"""Drive matrix elements between oscillator eigenstates and blockade nodes.

All amplitudes are functions of the Lamb-Dicke parameter ``eta``, the
recoil ``k1 + k2`` measured in units of ``1/x0``. For a resonance of
ladder step ``N_m`` and momentum detuning ``delta_p`` it is
``eta = (N_m + delta_p) / 2``, independent of the oscillator.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NonFiniteError
from .specfun import X0, laguerre, log_factorial_ratio


def lamb_dicke(N_m: int, delta_p: float) -> float:
    if N_m < 1:
        raise DomainError(f"ladder step must be a positive integer, got {N_m}")
    if delta_p < -N_m:
        raise DomainError(f"momentum detuning {delta_p} below -N_m = {-N_m}")
    return (N_m + delta_p) / 2.0


@dataclass(frozen=True)
class Resonance1D:
    N_m: int
    delta_p: float

    def __post_init__(self):
        lamb_dicke(self.N_m, self.delta_p)

    @property
    def eta(self) -> float:
        return lamb_dicke(self.N_m, self.delta_p)

    @classmethod
    def at_blockade(cls, n_bk: int, N_m: int, root_index: int = 1) -> "Resonance1D":
        return cls(N_m, find_blockade_detuning(n_bk, N_m, root_index))

    def amplitude(self, n: int) -> float:
        """Coupling out of ``|n>`` to ``|n + N_m>`` (cos element for even steps, sin for odd)."""
        return ladder_amplitude(n, self.N_m, self.eta)


@dataclass(frozen=True)
class Resonance2D:
    """Joint resonance ``|m, n> -> |m + n_x, n + n_y>`` of two trap axes."""

    n_x: int
    n_y: int
    delta_px: float
    delta_py: float
    trap_ratio: float = 1.0  # Omega_y / Omega_x

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise DomainError("2D ladder steps must be positive integers")
        lamb_dicke(self.n_x, self.delta_px)
        lamb_dicke(self.n_y, self.delta_py)
        if self.trap_ratio <= 0:
            raise DomainError("trap frequencies must be positive")

    @property
    def eta_x(self) -> float:
        return (self.n_x + self.delta_px) / 2.0

    @property
    def eta_y(self) -> float:
        return (self.n_y + self.delta_py) / 2.0

    @property
    def parity(self) -> int:
        """0 for even joint transitions (cos term), 1 for odd (sin term)."""
        return (self.n_x + self.n_y) % 2

    @property
    def carrier(self) -> float:
        """Beat frequency ``omega1 - omega2`` in units of Omega_x."""
        return self.n_x + self.n_y * self.trap_ratio

    @property
    def theta(self) -> float:
        return resonance_geometry_2d(self.n_x, self.n_y, self.delta_px, self.delta_py, 1.0, self.trap_ratio)[1]

    def coupling(self, m: int, n: int) -> float:
        return coupling_2d(m, n, self.n_x, self.n_y, self.eta_x, self.eta_y)


def displacement_element(m: int, n: int, kappa: float) -> complex:
    """``<m| exp(i kappa x) |n>`` with ``kappa`` in internal units (``eta = kappa x0``).

    The eigenfunctions are real, so the matrix is symmetric in ``(m, n)``;
    complex conjugation would instead give the element of ``exp(-i kappa x)``.
    """
    if m < n:
        return displacement_element(n, m, kappa)
    eta = kappa * X0
    d = m - n
    y = eta * eta
    mag = math.exp(0.5 * log_factorial_ratio(n, m) - y / 2.0) * laguerre(n, d, y)
    value = (1j ** (d % 4)) * mag * eta**d
    if not np.isfinite(value):
        raise NonFiniteError("non-finite displacement element", m=m, n=n, kappa=kappa)
    return complex(value)


def _signed_element(n: int, step: int, eta):
    """``(-1)^(step//2) sqrt(n!/(n+step)!) eta^step exp(-eta^2/2) L_n^(step)(eta^2)``."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise DomainError("Lamb-Dicke parameter must be nonnegative")
    y = eta * eta
    lf = 0.5 * log_factorial_ratio(n, n + step)
    val = (-1) ** (step // 2) * np.exp(lf - y / 2.0) * eta**step * laguerre(n, step, y)
    return float(val) if val.ndim == 0 else val


def even_amplitude(n: int, k: int, eta):
    """``<n+2k| cos(kappa x) |n>``; ``k = 1`` is the step-2 amplitude ``g_n``."""
    if k < 1:
        raise DomainError("even amplitude needs k >= 1")
    return _signed_element(n, 2 * k, eta)


def odd_amplitude(n: int, k: int, eta):
    """``<n+2k+1| sin(kappa x) |n>``; ``k = 1`` is the step-3 amplitude ``xi_n``."""
    if k < 0:
        raise DomainError("odd amplitude needs k >= 0")
    return _signed_element(n, 2 * k + 1, eta)


def ladder_amplitude(n: int, N_m: int, eta):
    """Resonant coupling ``|n> -> |n + N_m>`` for a drive of ladder step ``N_m``."""
    if N_m % 2 == 0:
        return even_amplitude(n, N_m // 2, eta)
    return odd_amplitude(n, (N_m - 1) // 2, eta)


def ladder_amplitudes(size: int, N_m: int, eta: float) -> np.ndarray:
    """Vector ``a[n] = ladder_amplitude(n, N_m, eta)`` for ``n < size``.

    Evaluates all degrees at once with the Laguerre recurrence in ``n``.
    """
    if size <= 0:
        return np.zeros(0)
    y = eta * eta
    lag = np.empty(size)
    prev, cur = 1.0, 1.0 + N_m - y
    lag[0] = prev
    if size > 1:
        lag[1] = cur
    for k in range(1, size - 1):
        prev, cur = cur, ((2 * k + 1 + N_m - y) * cur - (k + N_m) * prev) / (k + 1)
        lag[k + 1] = cur
    ns = np.arange(size, dtype=float)
    lf = 0.5 * (gammaln(ns + 1.0) - gammaln(ns + N_m + 1.0))
    out = (-1) ** (N_m // 2) * np.exp(lf - y / 2.0) * eta**N_m * lag
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("non-finite ladder amplitudes", size=size, N_m=N_m, eta=eta)
    return out


# -- blockade nodes --------------------------------------------------------


def _largest_root_bound(n: int, alpha: int) -> float:
    # every zero of L_n^(alpha) lies below 2n + alpha + 1 + sqrt((2n+alpha+1)^2 + 1/4 - alpha^2)
    s = 2 * n + alpha + 1
    return s + math.sqrt(s * s + 0.25)


def blockade_etas(n_bk: int, N_m: int, tol: float = 0.0) -> np.ndarray:
    """All positive ``eta`` where the step-``N_m`` amplitude out of ``|n_bk>`` vanishes.

    Bisection runs until the bracket is narrower than ``tol`` (default: down
    to adjacent floating-point numbers).
    """
    if n_bk < 0 or N_m < 1:
        raise DomainError("need n_bk >= 0 and N_m >= 1")
    if n_bk == 0:
        return np.zeros(0)
    eta_hi = math.sqrt(_largest_root_bound(n_bk, N_m))
    samples = 64 * (n_bk + N_m) + 256
    while True:
        grid = np.linspace(0.0, eta_hi, samples + 1)[1:]
        vals = laguerre(n_bk, N_m, grid * grid)
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if idx.size >= n_bk or samples > 2**22:
            break
        samples *= 4
    if idx.size != n_bk:
        raise NonFiniteError("could not bracket every Laguerre zero", n=n_bk, alpha=N_m, found=int(idx.size))
    roots = np.empty(idx.size)
    for j, i in enumerate(idx):
        lo, hi = grid[i], grid[i + 1]
        f_lo = laguerre(n_bk, N_m, lo * lo)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break  # interval exhausted at machine precision
            f_mid = laguerre(n_bk, N_m, mid * mid)
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_mid < 0) == (f_lo < 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        roots[j] = 0.5 * (lo + hi)
    return roots


def blockade_detunings(n_bk: int, N_m: int) -> np.ndarray:
    """Every momentum detuning that blocks ``|n_bk> -> |n_bk + N_m>``, ascending."""
    return 2.0 * blockade_etas(n_bk, N_m) - N_m


def find_blockade_detuning(n_bk: int, N_m: int, root_index: int = 1) -> float:
    """Momentum detuning of the ``root_index``-th node (ascending, 1-based)."""
    if n_bk < 1:
        raise DomainError(f"|{n_bk}> has no blockade nodes (L_0 has no zeros)")
    roots = blockade_detunings(n_bk, N_m)
    if not 1 <= root_index <= roots.size:
        raise DomainError(f"root_index {root_index} out of range; {roots.size} nodes available")
    return float(roots[root_index - 1])


def amplitude_map(n_max: int, delta_p_range, N_m: int = 2, samples: int = 201):
    """``|a_n(eta(delta_p))|`` for ``n = 0..n_max`` (rows) over a detuning grid.

    Returns ``(delta_p, table)`` with ``table.shape == (n_max + 1, samples)``.
    """
    if samples < 2:
        raise DomainError("amplitude map needs at least two samples")
    lo, hi = delta_p_range
    lo = max(lo, -N_m)
    dps = np.linspace(lo, hi, samples)
    etas = (N_m + dps) / 2.0
    table = np.empty((n_max + 1, samples))
    for n in range(n_max + 1):
        table[n] = np.abs(ladder_amplitude(n, N_m, etas))
    return dps, table


def write_amplitude_map(path, delta_p, table, header_comment: str | None = None) -> None:
    with open(Path(path), "w", newline="\n") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_p"] + [f"n={n}" for n in range(table.shape[0])])
        for j, dp in enumerate(delta_p):
            w.writerow([f"{dp:.17g}"] + [f"{v:.17g}" for v in table[:, j]])


# -- two trap axes ---------------------------------------------------------


def amplitude_2d(m: int, n: int, n_x: int, n_y: int, eta_x: float, eta_y: float) -> float:
    """Product amplitude ``F_{m,n}^{(n_x, n_y)}(eta_x, eta_y)``."""
    if min(m, n, n_x, n_y) < 0 or eta_x < 0 or eta_y < 0:
        raise DomainError("amplitude_2d arguments must be nonnegative")
    yx, yy = eta_x * eta_x, eta_y * eta_y
    lf = 0.5 * (log_factorial_ratio(m, m + n_x) + log_factorial_ratio(n, n + n_y))
    return float(
        math.exp(lf - (yx + yy) / 2.0)
        * eta_x**n_x
        * eta_y**n_y
        * laguerre(m, n_x, yx)
        * laguerre(n, n_y, yy)
    )


def coupling_2d(m: int, n: int, n_x: int, n_y: int, eta_x: float, eta_y: float) -> float:
    """Signed resonant element ``(-1)^k F`` with ``k = (n_x + n_y) // 2``.

    For ``(1, 1)`` this is ``g_{m,n} = -F^{(1,1)}``; for ``(1, 2)`` it is ``xi_{m,n} = -F^{(1,2)}``.
    """
    return (-1) ** ((n_x + n_y) // 2) * amplitude_2d(m, n, n_x, n_y, eta_x, eta_y)


def coupling_2d_table(shape, n_x: int, n_y: int, eta_x: float, eta_y: float) -> np.ndarray:
    """``A[m, n] = coupling_2d(m, n, ...)`` for all ``m < shape[0]``, ``n < shape[1]``."""
    ax = ladder_like(shape[0], n_x, eta_x)
    ay = ladder_like(shape[1], n_y, eta_y)
    return (-1) ** ((n_x + n_y) // 2) * np.outer(ax, ay)


def ladder_like(size: int, step: int, eta: float) -> np.ndarray:
    """Unsigned single-axis factor ``sqrt(n!/(n+step)!) eta^step e^{-eta^2/2} L_n^(step)(eta^2)``."""
    if step == 0:
        y = eta * eta
        return np.array([math.exp(-y / 2.0) * laguerre(n, 0, y) for n in range(size)])
    return (-1) ** (step // 2) * ladder_amplitudes(size, step, eta)


def resonance_geometry_2d(n_x, n_y, delta_px, delta_py, Omega_x, Omega_y, c: float = 1.0):
    """Central KD frequency and propagation angle for a joint 2D resonance.

    Trap frequencies may be given in any unit; with ``hbar = M = 1`` the
    axis momentum scales are ``k_{x0} = sqrt(Omega_x / 2)``. ``c`` sets the
    speed of light in those units. Returns ``(omega_KD, theta, omega_1, omega_2)``.
    """
    if Omega_x <= 0 or Omega_y <= 0:
        raise DomainError("trap frequencies must be positive")
    kx0 = math.sqrt(Omega_x / 2.0)
    ky0 = math.sqrt(Omega_y / 2.0)
    ax, ay = n_x + delta_px, n_y + delta_py
    omega_kd = 0.5 * c * math.sqrt(ax * ax * kx0 * kx0 + ay * ay * ky0 * ky0)
    theta = math.atan2(ay * math.sqrt(Omega_y / Omega_x), ax)
    beat = n_x * Omega_x + n_y * Omega_y
    return omega_kd, theta, omega_kd + beat / 2.0, omega_kd - beat / 2.0
