"""Driven dynamics of the truncated oscillator ladder.

Amplitudes ``C_n`` are interaction-picture coefficients: the free phases
``exp(-i (n + 1/2) t)`` are factored out, so without a drive they are
constant. Internally time is measured in ``1/Omega0``; every public time
(pulse duration, snapshot times, integration window) is in trap periods
``2 pi / Omega0``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .amplitudes import Resonance1D, Resonance2D, coupling_2d_table, ladder_amplitudes
from .cashkarp import CashKarp
from .errors import DomainError, TruncationError

TWO_PI = 2.0 * math.pi
MODES = ("full-carrier", "rotating-wave")


@dataclass(frozen=True)
class PulseEnvelope:
    """Gaussian KD pulse ``lambda_peak * exp(-2 t^2 / tau^2)`` times its carrier.

    ``lambda_peak`` is in units of ``hbar Omega0``, ``tau_KD`` in trap periods and
    ``carrier`` (the beat ``omega1 - omega2``) in units of ``Omega0``.
    """

    lambda_peak: float
    tau_KD: float
    carrier: float
    mode: str = "full-carrier"

    def __post_init__(self):
        if self.tau_KD <= 0:
            raise DomainError("pulse duration must be positive")
        if self.mode not in MODES:
            raise DomainError(f"unknown carrier mode {self.mode!r}; expected one of {MODES}")

    @property
    def tau(self) -> float:
        """Duration in internal time units."""
        return TWO_PI * self.tau_KD

    def window(self) -> tuple[float, float]:
        """Integration window, five 1/e durations centred on the peak (periods)."""
        return -2.5 * self.tau_KD, 2.5 * self.tau_KD

    def envelope(self, t: float) -> float:
        return self.lambda_peak * math.exp(-2.0 * t * t / (self.tau * self.tau))

    def factors(self, t: float, odd: bool) -> tuple[complex, complex]:
        """Couplings multiplying the upward and downward ladder terms at internal time ``t``."""
        env = self.envelope(t)
        if self.mode == "rotating-wave":
            up = env * (0.5j if odd else 0.5)
        else:
            w = self.carrier * t
            drive = env * (math.sin(w) if odd else math.cos(w))
            up = drive * complex(math.cos(w), math.sin(w))
        return up, up.conjugate()

    def pulse_area(self, amplitude: float) -> float:
        return abs(self.lambda_peak * amplitude) * self.tau * math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class StateVector1D:
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=complex))

    @classmethod
    def basis(cls, n: int, size: int) -> "StateVector1D":
        c = np.zeros(size, dtype=complex)
        c[n] = 1.0
        return cls(c)

    @property
    def truncation(self) -> int:
        return self.amplitudes.size

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.populations()))

    def ladder_offset(self, N_m: int) -> int | None:
        occ = np.nonzero(self.populations() > 0)[0]
        if occ.size == 0:
            return None
        residues = set((occ % N_m).tolist())
        return residues.pop() if len(residues) == 1 else None


@dataclass(frozen=True)
class StateVector2D:
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 2:
            raise DomainError("2D state needs a matrix of amplitudes")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def basis(cls, m: int, n: int, shape) -> "StateVector2D":
        c = np.zeros(shape, dtype=complex)
        c[m, n] = 1.0
        return cls(c)

    @property
    def truncation(self) -> tuple[int, int]:
        return self.amplitudes.shape

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(self.populations()))


@dataclass
class IntegratorControls:
    """Tolerances and bookkeeping; times in trap periods."""

    rtol: float = 1e-9
    atol: float = 1e-12
    dt_initial: float = 0.01
    dt_min: float = 1e-6
    tail_tol: float = 1e-8
    snapshot_every: float = 0.05
    window: tuple[float, float] | None = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norm_drift: np.ndarray
    max_norm_drift: float
    max_tail: float
    stats: dict
    resonance: object = None
    pulse: PulseEnvelope | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        cls = StateVector2D if self.states.ndim == 3 else StateVector1D
        return cls(self.states[-1], time=float(self.times[-1]))

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def summary(self) -> dict:
        pops = np.abs(self.states[-1]) ** 2
        out = {
            "final_time": float(self.times[-1]),
            "final_populations": pops.tolist(),
            "peak": [int(i) for i in np.unravel_index(int(np.argmax(pops)), pops.shape)],
            "max_norm_drift": float(self.max_norm_drift),
            "max_tail_population": float(self.max_tail),
            "integrator": dict(self.stats),
        }
        if pops.ndim == 1:
            out["peak"] = out["peak"][0]
        return out

    def to_csv(self, path, header_comment: str | None = None) -> None:
        pops = self.populations().reshape(len(self.times), -1)
        if self.states.ndim == 3:
            nx, ny = self.states.shape[1:]
            labels = [f"P_{m}_{n}" for m in range(nx) for n in range(ny)]
        else:
            labels = [f"P_{n}" for n in range(pops.shape[1])]
        with open(path, "w", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + labels + ["norm_drift"])
            for t, row, d in zip(self.times, pops, self.norm_drift):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row] + [f"{d:.17g}"])

    def to_json(self, path, extra: dict | None = None) -> None:
        doc = self.summary()
        if extra:
            doc.update(extra)
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


# -- right-hand sides ------------------------------------------------------


def derivative_1d(t, state, resonance: Resonance1D, pulse: PulseEnvelope, amps=None):
    """``dC/dt`` of the step-``N_m`` ladder at internal time ``t``.

    ``state`` is a ``StateVector1D`` or a bare complex array. Couplings
    running past the truncation are dropped.
    """
    c = state.amplitudes if isinstance(state, StateVector1D) else state
    N = resonance.N_m
    size = c.size
    if amps is None:
        amps = ladder_amplitudes(max(size - N, 0), N, resonance.eta)
    up, down = pulse.factors(t, odd=bool(N % 2))
    d = np.zeros_like(c)
    if size > N:
        d[N:] = up * amps * c[:-N]
        d[:-N] += down * amps * c[N:]
    return -1j * d


def derivative_2d(t, state, resonance: Resonance2D, pulse: PulseEnvelope, table=None):
    """``dC_{m,n}/dt`` of the joint ladder ``|m,n> <-> |m+n_x, n+n_y>``."""
    c = state.amplitudes if isinstance(state, StateVector2D) else state
    nx, ny = resonance.n_x, resonance.n_y
    sx, sy = c.shape
    d = np.zeros_like(c)
    if sx <= nx or sy <= ny:
        return d
    if table is None:
        table = coupling_2d_table((sx - nx, sy - ny), nx, ny, resonance.eta_x, resonance.eta_y)
    up, down = pulse.factors(t, odd=bool(resonance.parity))
    d[nx:, ny:] = up * table * c[:-nx, :-ny]
    d[:-nx, :-ny] += down * table * c[nx:, ny:]
    return -1j * d


def _tail_population(c, resonance) -> float:
    if c.ndim == 1:
        width = max(2, resonance.N_m)
        return float(np.sum(np.abs(c[-width:]) ** 2))
    bx = max(2, resonance.n_x)
    by = max(2, resonance.n_y)
    p = np.abs(c) ** 2
    return float(np.sum(p[-bx:, :]) + np.sum(p[:-bx, -by:]))


def integrate(initial, resonance, pulse: PulseEnvelope, controls: IntegratorControls | None = None) -> Trajectory:
    """Propagate a 1D or 2D state through the KD pulse.

    Raises
    ------
    IntegrationError
        The step size fell below ``controls.dt_min``.
    TruncationError
        Population in the top band of the basis exceeded ``controls.tail_tol``.
    """
    controls = controls or IntegratorControls()
    two_d = isinstance(resonance, Resonance2D)
    c0 = np.array(initial.amplitudes if hasattr(initial, "amplitudes") else initial, dtype=complex)
    norm0 = float(np.sum(np.abs(c0) ** 2))
    if abs(norm0 - 1.0) > 1e-6:
        raise DomainError(f"initial state is not normalized (norm {norm0})")

    if two_d:
        nx, ny = resonance.n_x, resonance.n_y
        sx, sy = c0.shape
        table = coupling_2d_table((max(sx - nx, 0), max(sy - ny, 0)), nx, ny, resonance.eta_x, resonance.eta_y)

        def rhs(t, y):
            return derivative_2d(t, y, resonance, pulse, table)

    else:
        amps = ladder_amplitudes(max(c0.size - resonance.N_m, 0), resonance.N_m, resonance.eta)

        def rhs(t, y):
            return derivative_1d(t, y, resonance, pulse, amps)

    start, stop = controls.window if controls.window is not None else pulse.window()
    n_snap = max(int(math.ceil((stop - start) / controls.snapshot_every - 1e-9)), 1)
    times = np.linspace(start, stop, n_snap + 1)

    stepper = CashKarp(rhs, rtol=controls.rtol, atol=controls.atol, dt_min=TWO_PI * controls.dt_min)
    tracker = {"drift": 0.0, "tail": _tail_population(c0, resonance)}

    def on_step(t, y):
        drift = abs(1.0 - float(np.vdot(y, y).real) / norm0)
        tail = _tail_population(y, resonance)
        tracker["drift"] = max(tracker["drift"], drift)
        tracker["tail"] = max(tracker["tail"], tail)
        if tail > controls.tail_tol:
            raise TruncationError(
                "population reached the top of the basis; increase the truncation",
                t_periods=t / TWO_PI,
                tail_population=tail,
                tail_tol=controls.tail_tol,
                truncation=y.shape,
            )

    states = np.empty((times.size,) + c0.shape, dtype=complex)
    drift = np.zeros(times.size)
    states[0] = c0
    y = c0
    h = TWO_PI * controls.dt_initial
    for i in range(1, times.size):
        y, h = stepper.advance(TWO_PI * times[i - 1], y, TWO_PI * times[i], h, on_step)
        states[i] = y
        drift[i] = abs(1.0 - float(np.vdot(y, y).real) / norm0)

    return Trajectory(
        times=times,
        states=states,
        norm_drift=drift,
        max_norm_drift=tracker["drift"],
        max_tail=tracker["tail"],
        stats=stepper.stats.as_dict(),
        resonance=resonance,
        pulse=pulse,
    )


# -- pulse design ----------------------------------------------------------


def pulse_coupling(amplitude: float, tau_KD: float, area: float = math.pi) -> float:
    """Peak coupling giving the requested Gaussian pulse area on a transition.

    With ``Omega_R = lambda_peak |amplitude|`` the area is
    ``Omega_R tau sqrt(pi/2)``, so a pi pulse needs ``Omega_R tau = sqrt(2 pi)``.
    """
    if amplitude == 0:
        raise DomainError("cannot drive a blocked transition (amplitude is zero)")
    return area / (abs(amplitude) * TWO_PI * tau_KD * math.sqrt(math.pi / 2.0))


def pi_pulse_coupling(n_from: int, N_m: int, eta: float, tau_KD: float, area: float = math.pi) -> float:
    a = ladder_amplitudes(n_from + 1, N_m, eta)[n_from]
    if abs(a) < 1e-14:
        raise DomainError(f"|{n_from}> -> |{n_from + N_m}> is blocked at eta={eta}")
    return pulse_coupling(a, tau_KD, area)


def default_truncation(n_bk: int, N_m: int) -> int:
    """Next multiple of ``N_m`` above ``1.5 (n_bk + 4 sqrt(n_bk))``."""
    target = 1.5 * (n_bk + 4.0 * math.sqrt(n_bk))
    return int(N_m * (math.floor(target / N_m) + 1))


def ladder_blockade(resonance: Resonance1D, start: int = 0, limit: int = 4000) -> int | None:
    """First state on the ladder above ``start`` whose upward amplitude (nearly) vanishes.

    The node is located by the first sign change of the amplitude along the
    ladder; of the two bracketing states the one with the smaller coupling is
    returned.
    """
    ladder = ladder_amplitudes(limit, resonance.N_m, resonance.eta)[start::resonance.N_m]
    if ladder.size == 0:
        return None
    scale = np.max(np.abs(ladder))
    zero = np.abs(ladder) <= 1e-12 * scale
    flips = np.signbit(ladder[:-1]) != np.signbit(ladder[1:])
    hits = np.nonzero(zero[:-1] | flips)[0]
    if hits.size == 0:
        return int(start + resonance.N_m * np.nonzero(zero)[0][0]) if zero.any() else None
    k = int(hits[0])
    if not zero[k] and abs(ladder[k + 1]) < abs(ladder[k]):
        k += 1
    return int(start + resonance.N_m * k)


@dataclass
class SearchControls:
    """Settings for :func:`tune_cat_pulse` (couplings relative to the ground-state pi pulse)."""

    scan_low: float = 0.25
    scan_high: float = 20.0
    scan_points: int = 40
    scan_mode: str | None = "rotating-wave"
    rel_tol: float = 1e-3
    max_iter: int = 60
    prominence: float = 0.5


def _first_prominent_peak(scores: np.ndarray, prominence: float) -> int:
    # strong couplings revisit the target many times; the first good maximum is the clean sweep
    top = float(np.max(scores))
    padded = np.concatenate(([-np.inf], scores, [-np.inf]))
    for i, s in enumerate(scores):
        if s >= prominence * top and s >= padded[i] and s >= padded[i + 2]:
            return i
    return int(np.argmax(scores))


def final_populations(resonance, pulse, size, controls=None) -> np.ndarray:
    ctl = replace(controls or IntegratorControls(), snapshot_every=pulse.window()[1] - pulse.window()[0])
    traj = integrate(StateVector1D.basis(0, size), resonance, pulse, ctl)
    return np.abs(traj.states[-1]) ** 2


def tune_cat_pulse(
    target_n_max: int,
    resonance: Resonance1D,
    tau_KD: float,
    search: SearchControls | None = None,
    *,
    truncation: int | None = None,
    mode: str = "full-carrier",
    controls: IntegratorControls | None = None,
    details: bool = False,
):
    """Find the peak coupling that piles the ground state up at ``target_n_max``.

    A geometric scan (by default in the cheap rotating-wave picture) locates
    the weakest coupling whose target population is a local maximum within
    ``search.prominence`` of the best scanned value, then a golden-section search in the requested carrier
    mode maximizes the final population of ``|target_n_max>``.
    """
    search = search or SearchControls()
    N = resonance.N_m
    if target_n_max % N:
        raise DomainError(f"|{target_n_max}> is not on the step-{N} ladder from the ground state")
    n_bk = ladder_blockade(resonance)
    if n_bk is None or target_n_max > n_bk:
        raise DomainError(f"target |{target_n_max}> is unreachable below the blockade state n_bk={n_bk}")
    size = truncation or default_truncation(n_bk, N)
    lam_pi = pi_pulse_coupling(0, N, resonance.eta, tau_KD)

    def objective(lam, m):
        pulse = PulseEnvelope(lam, tau_KD, float(N), m)
        try:
            return final_populations(resonance, pulse, size, controls)[target_n_max]
        except TruncationError:
            # strong enough to leak through the blockade to the basis edge: not a candidate
            return -1.0

    grid = lam_pi * np.geomspace(search.scan_low, search.scan_high, search.scan_points)
    scan_mode = search.scan_mode or mode
    scores = np.array([objective(lam, scan_mode) for lam in grid])
    best = _first_prominent_peak(scores, search.prominence)
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid.size - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = objective(x1, mode), objective(x2, mode)
    it = 0
    while (b - a) > search.rel_tol * 0.5 * (a + b) and it < search.max_iter:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = objective(x1, mode)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = objective(x2, mode)
        it += 1
    lam = x1 if f1 >= f2 else x2
    pulse = PulseEnvelope(lam, tau_KD, float(N), mode)
    if details:
        return pulse, {
            "scan_couplings": grid.tolist(),
            "scan_scores": scores.tolist(),
            "objective": max(f1, f2),
            "iterations": it,
            "truncation": size,
            "n_bk": n_bk,
        }
    return pulse


def bell_fidelity(state: StateVector2D) -> float:
    """Overlap with ``(|0,0> + e^{i phi} |1,1>)/sqrt(2)`` maximized over ``phi``."""
    c = state.amplitudes
    return 0.5 * (abs(c[0, 0]) + abs(c[1, 1])) ** 2
