"""Physical and dimensionless model parameters.

The model couples a test particle (mass M, mean speed v0) to two harmonic
oscillators (mass m, frequency omega) centered at a1 > 0 and a2 with
|a2| > a1.  All asymptotics are organized by the large parameters
Lambda_j = |a_j| / gamma, where gamma = sqrt(hbar / (m omega)) is the
oscillator localization length.  `scaling_family` constructs the
one-parameter family of configurations in which every smallness
assumption holds simultaneously.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import ValidationError


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionful model constants in one consistent unit system.

    The interaction range delta is pinned to the oscillator length gamma,
    so the transit time across an oscillator matches its internal period.
    """

    M: float          # test particle mass
    m: float          # oscillator mass
    omega: float      # oscillator angular frequency
    hbar: float       # action constant
    lam: float        # coupling strength (energy)
    a1: float         # first oscillator center, > 0
    a2: float         # second oscillator center, |a2| > a1, sign free
    sigma: float      # packet width
    P0: float         # mean momentum magnitude
    delta: float      # interaction range, fixed equal to gamma

    def __post_init__(self):
        for name in ("M", "m", "omega", "hbar", "lam", "sigma", "P0", "delta"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"PhysicalParams: {name} must be positive")
        if self.a1 <= 0:
            raise ValidationError("PhysicalParams: a1 must be positive")
        if abs(self.a2) <= self.a1:
            raise ValidationError("PhysicalParams: |a2| must exceed a1")
        gamma = math.sqrt(self.hbar / (self.m * self.omega))
        if not math.isclose(self.delta, gamma, rel_tol=1e-12):
            raise ValidationError(
                f"PhysicalParams: delta={self.delta} must equal "
                f"gamma=sqrt(hbar/(m*omega))={gamma}"
            )

    @property
    def gamma(self) -> float:
        """Oscillator localization length sqrt(hbar / (m omega))."""
        return math.sqrt(self.hbar / (self.m * self.omega))

    @property
    def v0(self) -> float:
        """Mean speed P0 / M of the test particle."""
        return self.P0 / self.M

    def flight_time(self, j: int) -> float:
        """tau_j = |a_j| / v0, classical arrival time at oscillator j."""
        a = self.a1 if j == 1 else self.a2
        return abs(a) / self.v0

    def center(self, j: int) -> float:
        return self.a1 if j == 1 else self.a2

    def energy_level(self, n: int) -> float:
        """Oscillator level E_n = hbar omega (n + 1/2)."""
        return self.hbar * self.omega * (n + 0.5)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _mirrored(p: PhysicalParams) -> PhysicalParams:
    """Reflected configuration (a_j -> -a_j) used by symmetry diagnostics.

    Bypasses the a1 > 0 convention, which holds for physical inputs but
    not for the mirror image; every other invariant still applies.
    """
    q = object.__new__(PhysicalParams)
    for f in fields(PhysicalParams):
        object.__setattr__(q, f.name, getattr(p, f.name))
    object.__setattr__(q, "a1", -p.a1)
    object.__setattr__(q, "a2", -p.a2)
    return q


@dataclass(frozen=True)
class DimensionlessParams:
    """Derived ratios controlling the perturbative and asymptotic regimes."""

    lambda0: float    # lam / (M v0^2), dimensionless coupling
    dm: float         # m / M
    dE: float         # hbar omega / (M v0^2)
    dR1: float        # sigma / a1
    dR2: float        # sigma / |a2|
    dL1: float        # delta / a1
    dL2: float        # delta / |a2|
    dtau1: float      # v0 / (omega a1)
    dtau2: float      # v0 / (omega |a2|)
    tau1: float       # a1 / v0
    tau2: float       # |a2| / v0
    Lambda1: float    # a1 / gamma
    Lambda2: float    # |a2| / gamma
    epsilon: float    # nominal smallness scale of the configuration

    def q(self, n: int) -> float:
        """Stationary momentum shift q(n) = -n sqrt(dE / dm), <= 0 for n >= 0."""
        return -n * math.sqrt(self.dE / self.dm)

    def epsilon_effective(self) -> float:
        """sqrt(dm * dE), the scale used in the probability formulas."""
        return math.sqrt(self.dm * self.dE)


def derive_dimensionless(p: PhysicalParams, epsilon: float) -> DimensionlessParams:
    """Compute every dimensionless ratio from its defining expression."""
    if epsilon <= 0:
        raise ValidationError("derive_dimensionless: epsilon must be positive")
    v0 = p.v0
    Mv2 = p.M * v0 * v0
    a2 = abs(p.a2)
    return DimensionlessParams(
        lambda0=p.lam / Mv2,
        dm=p.m / p.M,
        dE=p.hbar * p.omega / Mv2,
        dR1=p.sigma / p.a1,
        dR2=p.sigma / a2,
        dL1=p.delta / p.a1,
        dL2=p.delta / a2,
        dtau1=v0 / (p.omega * p.a1),
        dtau2=v0 / (p.omega * a2),
        tau1=p.a1 / v0,
        tau2=a2 / v0,
        Lambda1=p.a1 / p.gamma,
        Lambda2=a2 / p.gamma,
        epsilon=epsilon,
    )


def scaling_family(epsilon: float, a2_sign: int = 1, lambda0: float | None = None) -> PhysicalParams:
    """One-parameter configuration with every smallness ratio tied to epsilon.

    M = v0 = a1 = 1, a2 = +-2, m = eps, omega = 1/eps, hbar = eps^2,
    sigma = gamma = delta = eps.  The coupling defaults to lambda0 = eps^3
    so the second-order signal (lambda0/eps)^2 = eps^4 stays well above
    double-precision noise while remaining perturbative.
    """
    if not 0 < epsilon < 1:
        raise ValidationError("scaling_family: require 0 < epsilon < 1")
    if a2_sign not in (+1, -1):
        raise ValidationError("scaling_family: a2_sign must be +1 or -1")
    lam0 = epsilon**3 if lambda0 is None else float(lambda0)
    return PhysicalParams(
        M=1.0,
        m=epsilon,
        omega=1.0 / epsilon,
        hbar=epsilon**2,
        lam=lam0 * 1.0,          # lambda0 * M v0^2 with M = v0 = 1
        a1=1.0,
        a2=2.0 * a2_sign,
        sigma=epsilon,
        P0=1.0,
        delta=epsilon,
    )


@dataclass(frozen=True)
class ValidationReport:
    """Per-assumption pass/fail record for a parameter configuration."""

    items: tuple          # (name, value, passed) triples
    passed: bool

    def failures(self):
        return [it for it in self.items if not it[2]]


def validate_assumptions(d: DimensionlessParams, bandwidth: float = 3.0,
                         margin: float = 0.1) -> ValidationReport:
    """Check each smallness ratio against epsilon within a pass band.

    Every ratio r in {dm, dE, dR_j, dL_j, dtau_j} must satisfy
    r/epsilon within [1/bandwidth, bandwidth]; the coupling must satisfy
    lambda0 < margin * epsilon.
    """
    eps = d.epsilon
    ratios = [
        ("dm", d.dm), ("dE", d.dE),
        ("dR1", d.dR1), ("dR2", d.dR2),
        ("dL1", d.dL1), ("dL2", d.dL2),
        ("dtau1", d.dtau1), ("dtau2", d.dtau2),
    ]
    items = []
    for name, value in ratios:
        rel = value / eps
        ok = (1.0 / bandwidth) <= rel <= bandwidth
        items.append((f"{name}/epsilon", rel, ok))
    lam_ok = d.lambda0 < margin * eps
    items.append(("lambda0 << epsilon", d.lambda0 / eps, lam_ok))
    items.append(("epsilon < 1", eps, eps < 1.0))
    passed = all(it[2] for it in items)
    return ValidationReport(items=tuple(items), passed=passed)
