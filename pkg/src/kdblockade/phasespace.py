"""Wavefunction synthesis, discrete Wigner functions and cat-state metrics.

Positions are reported in units of ``x0`` and momenta in units of
``hbar k0``. Wigner values are kept in the internal units ``hbar = M = Omega0 = 1``
(so the ground state has ``W(0, 0) = 1/pi``).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .dynamics import Trajectory
from .errors import DomainError, GridError, KDError
from .specfun import K0, X0, RealGrid, eigenfunction_matrix

TWO_PI = 2.0 * math.pi
BOUNDARY_TOL = 1e-8
OCCUPIED = 1e-16
BINARY_MAGIC = b"KDWG"
BINARY_VERSION = 1


@dataclass(frozen=True)
class WavefunctionGrid:
    grid: RealGrid
    values: np.ndarray
    time: float = 0.0

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density()) * self.grid.spacing)


@dataclass(frozen=True)
class WignerGrid:
    q: np.ndarray
    p: np.ndarray
    W: np.ndarray
    time: float = 0.0
    imag_residue: float = 0.0

    @property
    def dq(self) -> float:
        return float(self.q[1] - self.q[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def integral(self) -> float:
        # dq dp in internal units: x0 * k0 = 1/2
        return float(np.sum(self.W) * self.dq * self.dp * X0 * K0)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(f"# t = {self.time:.17g}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["q/x0", "p/hbar k0", "W"])
            for i, q in enumerate(self.q):
                for j, p in enumerate(self.p):
                    w.writerow([f"{q:.17g}", f"{p:.17g}", f"{self.W[i, j]:.17g}"])

    def to_binary(self, path) -> None:
        """16-byte header ``b"KDWG"`` + uint32 version, nq, np (little endian), then (q, p, W) float64 triplets."""
        nq, npp = self.W.shape
        qq, pp = np.meshgrid(self.q, self.p, indexing="ij")
        body = np.stack([qq.ravel(), pp.ravel(), self.W.ravel()], axis=1).astype("<f8")
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC + struct.pack("<III", BINARY_VERSION, nq, npp))
            fh.write(body.tobytes())

    @classmethod
    def from_binary(cls, path) -> "WignerGrid":
        with open(path, "rb") as fh:
            head = fh.read(16)
            if head[:4] != BINARY_MAGIC:
                raise KDError(f"{path} is not a Wigner grid file")
            _, nq, npp = struct.unpack("<III", head[4:])
            body = np.frombuffer(fh.read(), dtype="<f8").reshape(nq, npp, 3)
        return cls(q=body[:, 0, 0].copy(), p=body[0, :, 1].copy(), W=body[:, :, 2].copy())


@dataclass(frozen=True)
class CatMetrics:
    n_max: int
    width: float
    poissonian_sigma: float
    dx_cat: float
    dp_cat: float
    n_photon_recoils: float
    mean_n: float
    dx_measured: float | None = None
    dp_measured: float | None = None

    @property
    def sub_poissonian(self) -> bool:
        return is_sub_poissonian(self)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"sub_poissonian": bool(self.sub_poissonian)}


@dataclass(frozen=True)
class ProbabilityTrace:
    times: np.ndarray
    grid: RealGrid
    density: np.ndarray


# -- synthesis -------------------------------------------------------------


def _occupied(c: np.ndarray) -> np.ndarray:
    return np.nonzero(np.abs(c) ** 2 > OCCUPIED)[0]


class _Synthesizer:
    """Caches eigenfunction rows so many snapshots of one state are cheap."""

    def __init__(self, amplitudes, grid: RealGrid, momentum: bool = False):
        c = np.asarray(amplitudes, dtype=complex)
        self.ns = _occupied(c)
        self.c = c[self.ns]
        if momentum:
            # the (x/x0, p/hbar k0) picture is symmetric: phi_n(p) = (-i)^n phi_n(x)
            self.c = self.c * (-1j) ** (self.ns % 4)
        self.grid = grid
        self.rows = eigenfunction_matrix(self.ns, grid)
        self.energy = self.ns + 0.5

    def __call__(self, t: float) -> np.ndarray:
        return (self.c * np.exp(-1j * TWO_PI * t * self.energy)) @ self.rows

    def checked(self, t: float) -> np.ndarray:
        psi = self(t)
        edge = max(abs(psi[0]) ** 2, abs(psi[-1]) ** 2)
        if edge > BOUNDARY_TOL:
            raise GridError(
                f"grid [{self.grid.points[0]:g}, {self.grid.points[-1]:g}] x0 too small: boundary density {edge:.3g}"
            )
        return psi


def _amplitudes(state) -> np.ndarray:
    return np.asarray(state.amplitudes if hasattr(state, "amplitudes") else state, dtype=complex)


def synthesize(state, t: float, grid: RealGrid, momentum: bool = False) -> WavefunctionGrid:
    """``psi(x, t) = sum_n C_n exp(-i (n + 1/2) Omega0 t) phi_n(x)`` on ``grid`` (x0 units).

    ``t`` is in trap periods. With ``momentum=True`` the momentum-space
    wavefunction on a grid in ``hbar k0`` units is returned instead.

    Raises
    ------
    GridError
        The density at either end of the grid exceeds ``1e-8``.
    """
    syn = _Synthesizer(_amplitudes(state), grid, momentum)
    return WavefunctionGrid(grid, syn.checked(t), time=t)


def momentum_wavefunction(state, t: float, grid: RealGrid) -> WavefunctionGrid:
    return synthesize(state, t, grid, momentum=True)


# -- Wigner ----------------------------------------------------------------


def _correlations(psi: np.ndarray) -> np.ndarray:
    """``f[i, n] = conj(psi[i - n]) psi[i + n]`` for ``|n| <= len/2``, stored at ``n mod M``."""
    size = psi.size
    f = np.zeros((size, size), dtype=complex)
    f[:, 0] = np.abs(psi) ** 2
    for n in range(1, (size - 1) // 2 + 1):
        lo, hi = n, size - n
        val = np.conj(psi[lo - n : hi - n]) * psi[lo + n : hi + n]
        f[lo:hi, n] = val
        f[lo:hi, size - n] = np.conj(val)
    return f


def _p_axis(size: int, dx_int: float) -> np.ndarray:
    j = np.arange(size) - size // 2
    return j * math.pi / (size * dx_int)


def wigner(psi: WavefunctionGrid, p_max: float | None = None) -> WignerGrid:
    """Discrete Wigner function of a pure state.

    Pairs of samples at ``q -/+ n dx`` are used, so no interpolation is
    needed, and the sum over ``n`` becomes an FFT:
    ``W(q, p) = (dx/pi) sum_n psi*(q - n dx) psi(q + n dx) exp(-2 i p n dx)``.
    The default p axis is the full conjugate period, ``|p| < pi / (2 dx)``;
    ``p_max`` (in ``hbar k0``) crops it.
    """
    dx_int = psi.grid.spacing * X0
    values = psi.values * (1.0 / math.sqrt(X0))  # internal-unit normalization
    f = _correlations(values)
    spec = np.fft.fftshift(np.fft.fft(f, axis=1), axes=1) * (dx_int / math.pi)
    residue = float(np.max(np.abs(spec.imag)))
    if residue > 1e-10:
        raise KDError(f"Wigner function not real (imaginary residue {residue:.3g})")
    p = _p_axis(values.size, dx_int) / K0
    W = spec.real
    if p_max is not None:
        keep = np.abs(p) <= p_max
        p, W = p[keep], W[:, keep]
    return WignerGrid(q=psi.grid.points.copy(), p=p, W=np.ascontiguousarray(W), time=psi.time, imag_residue=residue)


def wigner_direct(psi: WavefunctionGrid, p: np.ndarray | None = None, rows=None) -> WignerGrid:
    """Literal double sum of the discrete Wigner formula (slow; used as a cross-check).

    ``p`` is in ``hbar k0`` units (defaults to the FFT axis); ``rows``
    restricts the q samples evaluated.
    """
    dx_int = psi.grid.spacing * X0
    values = psi.values * (1.0 / math.sqrt(X0))
    size = values.size
    p = _p_axis(size, dx_int) / K0 if p is None else np.asarray(p, dtype=float)
    p_int = p * K0
    rows = np.arange(size) if rows is None else np.asarray(rows)
    W = np.empty((rows.size, p.size))
    for r, i in enumerate(rows):
        k = min(i, size - 1 - i)
        n = np.arange(-k, k + 1)
        f = np.conj(values[i - n]) * values[i + n]
        total = np.exp(-2j * np.outer(p_int, n) * dx_int) @ f
        W[r] = (dx_int / math.pi) * total.real
    return WignerGrid(q=psi.grid.points[rows].copy(), p=p, W=W, time=psi.time)


def marginals(w: WignerGrid) -> tuple[np.ndarray, np.ndarray]:
    """Position density (per x0) and momentum density (per hbar k0)."""
    pos = X0 * np.sum(w.W, axis=1) * w.dp * K0
    mom = K0 * np.sum(w.W, axis=0) * w.dq * X0
    return pos, mom


# -- free evolution --------------------------------------------------------


def probability_trace(
    traj_or_state,
    grid: RealGrid,
    free_evolution_span: float = 1.0,
    samples: int = 200,
    start: float | None = None,
    momentum: bool = False,
) -> ProbabilityTrace:
    """``|psi(x, t)|^2`` over free evolution after the pulse (times in periods)."""
    if isinstance(traj_or_state, Trajectory):
        state = traj_or_state.final
        t0 = traj_or_state.times[-1] if start is None else start
    else:
        state = traj_or_state
        t0 = getattr(state, "time", 0.0) if start is None else start
    syn = _Synthesizer(_amplitudes(state), grid, momentum)
    times = t0 + np.linspace(0.0, free_evolution_span, samples)
    dens = np.empty((samples, len(grid)))
    for k, t in enumerate(times):
        dens[k] = np.abs(syn.checked(t)) ** 2
    return ProbabilityTrace(times=times, grid=grid, density=dens)


def peak_separation(density: np.ndarray, points: np.ndarray) -> float | None:
    """Distance between the two highest local maxima (leftmost pair on ties)."""
    idx, _ = find_peaks(density)
    if idx.size < 2:
        return None
    order = np.lexsort((idx, -density[idx]))
    a, b = idx[order[0]], idx[order[1]]
    return float(abs(points[b] - points[a]))


def measured_separation(state, grid: RealGrid, span: float = 1.0, samples: int = 400, momentum: bool = False) -> float:
    """Largest two-peak separation of the density over one free-evolution span."""
    trace = probability_trace(state, grid, span, samples, momentum=momentum)
    seps = [peak_separation(d, grid.points) for d in trace.density]
    seps = [s for s in seps if s is not None]
    if not seps:
        raise DomainError("density never shows two separate peaks")
    return max(seps)


# -- metrics ---------------------------------------------------------------


def fwhm_on_ladder(populations: np.ndarray, n_max: int, step: int) -> float:
    """Full width at half maximum along ``n_max + k*step``, linearly interpolated."""
    ladder = populations[n_max % step :: step]
    k0 = n_max // step
    half = populations[n_max] / 2.0

    def edge(direction):
        k = k0
        while 0 <= k + direction < ladder.size and ladder[k + direction] >= half:
            k += direction
        nxt = k + direction
        if not 0 <= nxt < ladder.size:
            return float(k)
        frac = (ladder[k] - half) / (ladder[k] - ladder[nxt])
        return k + direction * frac

    return step * (edge(1) - edge(-1))


def mean_energy(state) -> float:
    """``<E>`` in units of ``hbar Omega0``."""
    pops = np.abs(_amplitudes(state)) ** 2
    return float(np.sum(pops * (np.arange(pops.size) + 0.5)))


def cat_metrics(
    state,
    resonance,
    grid: RealGrid | None = None,
    span: float = 1.0,
    samples: int = 400,
) -> CatMetrics:
    """Population and separation metrics of a ladder cat state.

    When ``grid`` is given, the separations are also measured from the
    free-evolution position and momentum densities.
    """
    pops = np.abs(_amplitudes(state)) ** 2
    n_max = int(np.argmax(pops))
    if n_max == 0 or pops[n_max] <= 0:
        raise DomainError("population distribution has no clear peak above the ground state")
    width = fwhm_on_ladder(pops, n_max, resonance.N_m)
    sep = 4.0 * math.sqrt(n_max)
    dx_m = dp_m = None
    if grid is not None:
        dx_m = measured_separation(state, grid, span, samples)
        dp_m = measured_separation(state, grid, span, samples, momentum=True)
    return CatMetrics(
        n_max=n_max,
        width=width,
        poissonian_sigma=math.sqrt(n_max),
        dx_cat=sep,
        dp_cat=sep,
        n_photon_recoils=sep / (2.0 * resonance.eta),
        mean_n=float(np.sum(pops * np.arange(pops.size))),
        dx_measured=dx_m,
        dp_measured=dp_m,
    )


def is_sub_poissonian(metrics: CatMetrics) -> bool:
    return bool(metrics.width < 2.0 * metrics.poissonian_sigma)
