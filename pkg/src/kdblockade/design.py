"""SI experiment design: trap and KD-laser scales, feasibility checks and presets.

All inputs and outputs here are SI unless a name says otherwise. The bridge
:func:`scenario_to_dimensionless` converts a design into the internal units
consumed by :mod:`kdblockade.dynamics`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .amplitudes import Resonance1D, lamb_dicke
from .dynamics import PulseEnvelope
from .errors import DomainError

# CODATA 2018
C = 299792458.0
HBAR = 1.054571817e-34
E_CHARGE = 1.602176634e-19
M_E = 9.1093837015e-31
EPS0 = 8.8541878128e-12
MU0 = 1.25663706212e-6
AMU = 1.66053906660e-27

TIMESCALE_THRESHOLD = 5.0
REGIME_FACTOR = 10.0
ANHARMONIC_SAFETY = 10.0


@dataclass(frozen=True)
class ParticleSpec:
    kind: str
    mass: float
    charge: float | None = None
    polarizability: float | None = None

    def __post_init__(self):
        if self.mass <= 0:
            raise DomainError("mass must be positive")
        if self.kind == "charged":
            if self.charge is None or self.polarizability is not None:
                raise DomainError("a charged particle needs a charge and no polarizability")
        elif self.kind == "polarizable":
            if self.polarizability is None or self.charge is not None:
                raise DomainError("a polarizable particle needs a polarizability and no charge")
        else:
            raise DomainError(f"unknown particle kind {self.kind!r}")


@dataclass(frozen=True)
class TrapSpec:
    lambda_TL: float
    I_S: float
    W_y_TL: float
    W_z_TL: float
    tau_TL: float
    v_z: float
    avg_power: float | None = None

    def __post_init__(self):
        for name in ("lambda_TL", "I_S", "W_y_TL", "W_z_TL", "v_z"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.tau_TL < 0:
            raise DomainError("tau_TL must be non-negative (0 means continuous)")


@dataclass(frozen=True)
class KDSpec:
    I_KD: float
    tau_KD: float
    W_y_KD: float
    W_z_KD: float
    N_m: int
    delta_p: float
    avg_power: float | None = None

    def __post_init__(self):
        if self.I_KD < 0 or self.tau_KD <= 0 or self.W_y_KD <= 0 or self.W_z_KD <= 0:
            raise DomainError("KD-laser magnitudes must be positive")
        if self.N_m < 1:
            raise DomainError("N_m must be a positive integer")
        if self.N_m + self.delta_p <= 0:
            raise DomainError("N_m + delta_p must be positive")


@dataclass(frozen=True)
class DerivedScales:
    Omega_0: float
    x_0: float
    k_0: float
    omega_KD: float
    lambda_KD: float
    omega_1: float
    omega_2: float
    lambda_peak_SI: float
    lambda_peak_dimless: float
    eta: float

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.Omega_0


# -- calculators -----------------------------------------------------------


def trap_frequency(particle: ParticleSpec, trap: TrapSpec) -> float:
    """Harmonic frequency at the standing-wave node (ponderomotive) or antinode (dipole)."""
    m = particle.mass
    if particle.kind == "charged":
        return math.sqrt(particle.charge**2 * trap.I_S / (EPS0 * C**3 * m**2))
    return math.sqrt(4.0 * math.pi**2 * particle.polarizability * trap.I_S / (EPS0 * C * m * trap.lambda_TL**2))


def trap_intensity(particle: ParticleSpec, Omega_0: float, lambda_TL: float) -> float:
    """Inverse of :func:`trap_frequency`: the standing-wave intensity giving ``Omega_0``."""
    m = particle.mass
    if particle.kind == "charged":
        return Omega_0**2 * EPS0 * C**3 * m**2 / particle.charge**2
    return Omega_0**2 * EPS0 * C * m * lambda_TL**2 / (4.0 * math.pi**2 * particle.polarizability)


def oscillator_scales(mass: float, Omega_0: float) -> tuple[float, float]:
    """``x0 = sqrt(hbar / 2 m Omega0)`` and ``k0 = sqrt(m Omega0 / 2 hbar)``."""
    return math.sqrt(HBAR / (2.0 * mass * Omega_0)), math.sqrt(mass * Omega_0 / (2.0 * HBAR))


def _coupling_per_intensity(particle: ParticleSpec, omega_1: float, omega_2: float) -> float:
    if particle.kind == "charged":
        # A_i = sqrt(2 I / eps0 c omega_i^2)
        return particle.charge**2 / (2.0 * particle.mass) * 2.0 / (EPS0 * C * omega_1 * omega_2)
    # E_i = sqrt(2 I / eps0 c)
    return particle.polarizability / 2.0 * 2.0 / (EPS0 * C)


def coupling_peak(particle: ParticleSpec, kd: KDSpec, scales: DerivedScales) -> tuple[float, float]:
    """Peak coupling in joules and in units of ``hbar Omega0``."""
    lam = kd.I_KD * _coupling_per_intensity(particle, scales.omega_1, scales.omega_2)
    return lam, lam / (HBAR * scales.Omega_0)


def empirical_blockade(delta_p: float) -> float:
    """Rule-of-thumb blockade state ``(2/3) (2 pi / (2 + delta_p))^2``."""
    if delta_p <= -2.0:
        raise DomainError("empirical blockade formula diverges for delta_p <= -2")
    return (2.0 / 3.0) * (2.0 * math.pi / (2.0 + delta_p)) ** 2


def empirical_pulse_energy(particle: ParticleSpec, scales: DerivedScales, n_bk: float) -> float:
    """Rule-of-thumb fluence product ``I_KD tau_KD`` in J/m^2."""
    if n_bk <= 0:
        raise DomainError("n_bk must be positive")
    if particle.kind == "charged":
        D = particle.mass * scales.omega_KD / particle.charge**2
    else:
        D = 1.0 / (particle.polarizability * scales.omega_KD)
    return D / MU0 * math.sqrt(32.0 * n_bk * HBAR * particle.mass * scales.Omega_0 / math.pi)


@dataclass(frozen=True)
class AnharmonicityCheck:
    bound: float
    requested: float | None
    safety: float
    feasible: bool | None


def anharmonicity_bound(
    trap: TrapSpec, scales: DerivedScales, n_max: float | None = None, safety: float = ANHARMONIC_SAFETY
) -> AnharmonicityCheck:
    """Largest ladder state before trap anharmonicity, ``(3 / 16 pi^2) (lambda_TL / x0)^2``.

    ``feasible`` is true when ``n_max <= bound / safety``.
    """
    bound = 3.0 / (16.0 * math.pi**2) * (trap.lambda_TL / scales.x_0) ** 2
    feasible = None if n_max is None else bool(n_max <= bound / safety)
    return AnharmonicityCheck(bound=bound, requested=n_max, safety=safety, feasible=feasible)


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    U_0: float
    E_R: float
    transit_energy: float
    factor: float


def regime_classify(particle: ParticleSpec, trap: TrapSpec, scales: DerivedScales | None = None, factor: float = REGIME_FACTOR) -> RegimeReport:
    """Diffraction, Bragg or channeling regime of the electron trap.

    "Much greater" is read as a ratio of at least ``factor``; anything that
    satisfies no regime is ``indeterminate``.
    """
    if particle.kind != "charged":
        raise DomainError("regime classification is defined for charged particles")
    m = particle.mass
    omega_tl = 2.0 * math.pi * C / trap.lambda_TL
    k_tl = 2.0 * math.pi / trap.lambda_TL
    U0 = particle.charge**2 * trap.I_S / (2.0 * EPS0 * C * omega_tl**2 * m)
    E_R = HBAR**2 * (2.0 * k_tl) ** 2 / (2.0 * m)
    transit = HBAR / (trap.W_z_TL / trap.v_z)

    def gg(a, b):
        return a >= factor * b

    if gg(U0, E_R) and gg(E_R, transit):
        regime = "channeling"
    elif gg(E_R, transit) and gg(E_R, U0):
        regime = "Bragg"
    elif gg(transit, E_R) and gg(U0, E_R):
        regime = "diffraction"
    else:
        regime = "indeterminate"
    return RegimeReport(regime=regime, U_0=U0, E_R=E_R, transit_energy=transit, factor=factor)


@dataclass(frozen=True)
class TimescaleLink:
    upper: str
    lower: str
    upper_value: float
    lower_value: float
    ratio: float
    passed: bool


@dataclass(frozen=True)
class TimescaleReport:
    links: list = field(default_factory=list)
    threshold: float = TIMESCALE_THRESHOLD
    skipped: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(link.passed for link in self.links)


def validate_timescales(
    trap: TrapSpec, kd: KDSpec, scales: DerivedScales, threshold: float = TIMESCALE_THRESHOLD
) -> TimescaleReport:
    """Check ``tau_TL >> W_zTL/2v_z >> W_zKD/2v_z >> tau_KD >> 40 periods`` link by link.

    A link passes when the ratio is at least ``threshold``; equality passes,
    with a ``1e-12`` relative allowance so a ratio built to equal the
    threshold is not failed by rounding.
    A continuous trap (``tau_TL == 0``) skips the first link.
    """
    chain = [
        ("tau_TL", trap.tau_TL),
        ("W_z_TL/2v_z", trap.W_z_TL / (2.0 * trap.v_z)),
        ("W_z_KD/2v_z", kd.W_z_KD / (2.0 * trap.v_z)),
        ("tau_KD", kd.tau_KD),
        ("40 periods", 40.0 * scales.period),
    ]
    links, skipped = [], []
    for (a, va), (b, vb) in zip(chain, chain[1:]):
        if a == "tau_TL" and va == 0:
            skipped.append(f"{a} >> {b}")
            continue
        ratio = va / vb
        links.append(TimescaleLink(a, b, va, vb, ratio, bool(ratio >= threshold * (1.0 - 1e-12))))
    return TimescaleReport(links=links, threshold=threshold, skipped=skipped)


# -- SI <-> internal units ---------------------------------------------------


def derive_scales(particle: ParticleSpec, trap: TrapSpec, kd: KDSpec) -> DerivedScales:
    Omega = trap_frequency(particle, trap)
    x0, k0 = oscillator_scales(particle.mass, Omega)
    eta = lamb_dicke(kd.N_m, kd.delta_p)
    omega_kd = C * k0 * eta
    w1 = omega_kd + kd.N_m * Omega / 2.0
    w2 = omega_kd - kd.N_m * Omega / 2.0
    lam = kd.I_KD * _coupling_per_intensity(particle, w1, w2)
    return DerivedScales(
        Omega_0=Omega,
        x_0=x0,
        k_0=k0,
        omega_KD=omega_kd,
        lambda_KD=2.0 * math.pi * C / omega_kd,
        omega_1=w1,
        omega_2=w2,
        lambda_peak_SI=lam,
        lambda_peak_dimless=lam / (HBAR * Omega),
        eta=eta,
    )


def scenario_to_dimensionless(
    particle: ParticleSpec, trap: TrapSpec, kd: KDSpec, mode: str = "full-carrier"
) -> tuple[Resonance1D, PulseEnvelope, DerivedScales]:
    scales = derive_scales(particle, trap, kd)
    resonance = Resonance1D(kd.N_m, kd.delta_p)
    pulse = PulseEnvelope(
        lambda_peak=scales.lambda_peak_dimless,
        tau_KD=kd.tau_KD / scales.period,
        carrier=float(kd.N_m),
        mode=mode,
    )
    return resonance, pulse, scales


def dimensionless_to_si(
    particle: ParticleSpec, scales: DerivedScales, resonance: Resonance1D, pulse: PulseEnvelope, trap: TrapSpec
) -> dict:
    """Recover SI drive parameters from the internal-unit description.

    The beam geometry is not part of the dimensionless model, so only the
    intensities, durations and detuning are reconstructed.
    """
    eta = resonance.eta
    omega_kd = C * scales.k_0 * eta
    w1 = omega_kd + resonance.N_m * scales.Omega_0 / 2.0
    w2 = omega_kd - resonance.N_m * scales.Omega_0 / 2.0
    lam_si = pulse.lambda_peak * HBAR * scales.Omega_0
    return {
        "I_S": trap_intensity(particle, scales.Omega_0, trap.lambda_TL),
        "I_KD": lam_si / _coupling_per_intensity(particle, w1, w2),
        "tau_KD": pulse.tau_KD * scales.period,
        "N_m": resonance.N_m,
        "delta_p": resonance.delta_p,
        "lambda_KD": 2.0 * math.pi * C / omega_kd,
    }


# -- presets and reports ---------------------------------------------------


def _electron():
    particle = ParticleSpec("charged", M_E, charge=E_CHARGE)
    trap = TrapSpec(1.064e-6, 8e16, 100e-6, 1.6e-3, 0.75e-9, 6e6, avg_power=37.6)
    kd = KDSpec(2.6e15, 8e-11, 100e-6, 1.2e-3, 2, -1.8, avg_power=0.4)
    return particle, trap, kd


def _tppf84():
    particle = ParticleSpec("polarizable", 2810 * AMU, polarizability=2.22e-38)
    trap = TrapSpec(10.5e-6, 15e8, 20e-6, 5e-3, 0.0, 0.1, avg_power=30.0)
    kd = KDSpec(1.2e7, 1e-2, 10e-6, 3e-3, 2, -1.93, avg_power=0.28)
    return particle, trap, kd


def _sio2():
    particle = ParticleSpec("polarizable", 1e6 * AMU, polarizability=8.18e-36)
    trap = TrapSpec(5e-6, 10.4e5, 20e-6, 9e-3, 0.0, 0.02, avg_power=0.037)
    kd = KDSpec(2.3e3, 1.4e-1, 100e-6, 8e-3, 2, -1.93, avg_power=1.5e-3)
    return particle, trap, kd


PRESETS = {"electron": _electron, "TPPF84": _tppf84, "SiO2": _sio2}


def preset(name: str) -> tuple[ParticleSpec, TrapSpec, KDSpec]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def design_report(
    particle: ParticleSpec,
    trap: TrapSpec,
    kd: KDSpec,
    n_max: float | None = None,
    timescale_threshold: float = TIMESCALE_THRESHOLD,
    regime_factor: float = REGIME_FACTOR,
    anharmonic_safety: float = ANHARMONIC_SAFETY,
) -> dict:
    """Everything the design calculators know about one scenario, as plain JSON-able data."""
    scales = derive_scales(particle, trap, kd)
    n_bk = empirical_blockade(kd.delta_p) if kd.delta_p > -2 else None
    chain = validate_timescales(trap, kd, scales, timescale_threshold)
    target = n_max if n_max is not None else n_bk
    report = {
        "inputs": {"particle": asdict(particle), "trap": asdict(trap), "kd": asdict(kd)},
        "scales": asdict(scales) | {"period": scales.period},
        "empirical": {
            "n_bk": n_bk,
            "I_KD_tau_KD": empirical_pulse_energy(particle, scales, n_bk) if n_bk else None,
            "I_KD_tau_KD_given": kd.I_KD * kd.tau_KD,
        },
        "timescales": {
            "threshold": chain.threshold,
            "passed": chain.passed,
            "skipped": chain.skipped,
            "links": [asdict(link) for link in chain.links],
        },
        "anharmonicity": asdict(anharmonicity_bound(trap, scales, target, anharmonic_safety)),
        "n_sca": "not computed",
    }
    if particle.kind == "charged":
        report["regime"] = asdict(regime_classify(particle, trap, scales, regime_factor))
    else:
        report["regime"] = None
    return report
