"""Stark shifts, induced dipole moments, ionization rates and field limits.

The perturbative multivalley Stark shift is the second-order sum over
catalog states using the same dipole matrix elements as the Van der
Waals channel; its field derivative gives the induced dipole that
drives the dipole-dipole interaction.  Tunnel ionization uses the
parabolic-quantum-number asymptotic rate for excited states, which for
n1 = n2 = m = 0 reduces exactly to the ground-state formula
(omega alpha / F) exp(-alpha / F) with alpha = 4 sqrt(2 m_t) E_b^{3/2} / (3 e hbar)
and omega = 12 E_b / hbar.  Rates are clamped at the inverse orbital
period 1 / tau_B, tau_B = 2 pi hbar / E_b.

Fields at the boundary are V/um, energies meV, times ns; the conversion
to effective atomic units carries an adjustable calibration factor so
the field unit can be re-anchored to ground-state ionization data
without touching code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog
from .errors import CatalogInsufficient, ConfigError
from .units import DonorSpecies, EffectiveAtomicUnits

FIELD_CALIBRATION_DEFAULT = 1.0


@dataclass
class StarkResponse:
    """Second-order shift curve of one state along one field axis."""

    state: str
    field_axis: tuple
    fields_v_um: np.ndarray
    shifts_mev: np.ndarray
    quadratic_coefficient: float    # shift = c F^2 (meV per (V/um)^2)
    coupled_states: int

    @property
    def polarizability(self) -> float:
        """p = polarizability * F with p in e nm and F in V/um."""
        return -2.0 * self.quadratic_coefficient

    def shift_at(self, field_v_um: float) -> float:
        return self.quadratic_coefficient * field_v_um**2

    def dipole_moment(self, field_v_um: float, rel_step: float = 0.05) -> float:
        """-d(shift)/dF (e nm) by Richardson-extrapolated central
        differences on the quadratic response."""
        f = abs(field_v_um)
        h = rel_step * f if f > 0 else rel_step
        d1 = (self.shift_at(field_v_um + h) - self.shift_at(field_v_um - h)) / (2 * h)
        d2 = (self.shift_at(field_v_um + h / 2) - self.shift_at(field_v_um - h / 2)) / h
        return -(4.0 * d2 - d1) / 3.0


def perturbative_stark(
    catalog: Catalog,
    state_label: str,
    axis=(0.0, 0.0, 1.0),
    fields_v_um: np.ndarray = None,
) -> StarkResponse:
    """Multivalley second-order Stark response along ``axis``.

    Raises CatalogInsufficient when no catalog state couples to the
    target along the requested axis (the leading mixing states are
    missing from the basis).
    """
    state = catalog.state_by_label(state_label)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    units = catalog.units
    if fields_v_um is None:
        fields_v_um = np.linspace(0.0, 0.5, 11)

    coeff_au = 0.0
    coupled = 0
    for other, d in catalog.dipoles_from(state):
        gap = state.energy - other.energy
        if abs(gap) < 1e-12:
            continue
        amp = abs(np.vdot(axis.astype(complex), d))**2
        if amp <= 0.0:
            continue
        coupled += 1
        coeff_au += amp / gap
    if coupled == 0:
        raise CatalogInsufficient(
            f"no catalog state dipole-couples to {state_label} along {tuple(axis)}")

    # meV per (V/um)^2
    c = (coeff_au * units.hartree_mev / units.field_unit_v_per_um**2)
    fields = np.asarray(fields_v_um, dtype=float)
    return StarkResponse(
        state=state_label, field_axis=tuple(axis), fields_v_um=fields,
        shifts_mev=c * fields**2, quadratic_coefficient=float(c),
        coupled_states=coupled,
    )


def induced_dipole_moment(catalog: Catalog, state_label: str,
                          field_v_um: float, axis=(0.0, 0.0, 1.0)) -> float:
    """Field-induced dipole of a state (e a_B*) at the given field."""
    resp = perturbative_stark(catalog, state_label, axis=axis)
    p_e_nm = resp.dipole_moment(field_v_um)
    return p_e_nm / catalog.units.bohr_radius_nm


# -- ionization -------------------------------------------------------------


@dataclass(frozen=True)
class IonizationModel:
    """Parabolic-state tunnel-ionization parameters of one level."""

    principal_n: int
    magnetic_m: int
    parabolic_n1: int
    parabolic_n2: int
    binding_energy_mev: float
    charge: float = 1.0
    tunneling_mass_ratio: float = 1.0   # relative to the transverse mass
    units: EffectiveAtomicUnits = field(default_factory=EffectiveAtomicUnits.for_silicon)
    field_calibration: float = FIELD_CALIBRATION_DEFAULT

    def __post_init__(self):
        n = self.parabolic_n1 + self.parabolic_n2 + abs(self.magnetic_m) + 1
        if n != self.principal_n:
            raise ConfigError(
                f"inconsistent quantum numbers: n={self.principal_n} but "
                f"n1+n2+|m|+1={n}")
        if self.binding_energy_mev <= 0:
            raise ConfigError("binding energy must be positive")

    @property
    def binding_au(self) -> float:
        return self.binding_energy_mev / self.units.hartree_mev

    @property
    def atomic_field_alpha(self) -> float:
        """alpha = 4 sqrt(2 m) E_b^{3/2} / 3 in effective atomic units."""
        return (4.0 * math.sqrt(2.0 * self.tunneling_mass_ratio) / 3.0
                * self.binding_au**1.5)

    @property
    def attempt_rate_omega(self) -> float:
        return 12.0 * self.binding_au

    @property
    def bohr_period_ns(self) -> float:
        return 2.0 * math.pi / self.binding_au * self.units.time_unit_ns

    @property
    def classical_threshold_v_um(self) -> float:
        """Saddle-point field E_b^2 / (4 Z) above which escape is classical."""
        f_au = self.binding_au**2 / (4.0 * self.charge)
        return f_au * self.units.field_unit_v_per_um / self.field_calibration

    def field_to_au(self, field_v_um: float) -> float:
        return field_v_um * self.field_calibration / self.units.field_unit_v_per_um


def ionization_rate_excited(model: IonizationModel, field_v_um: float) -> float:
    """Tunnel rate (1/ns) of an excited parabolic state, floored in time
    by the orbital period."""
    if field_v_um <= 0:
        return 0.0
    f = model.field_to_au(field_v_um)
    alpha = model.atomic_field_alpha
    n2, m = model.parabolic_n2, abs(model.magnetic_m)
    pref = (model.attempt_rate_omega * alpha / f
            * (6.0 * alpha / f)**(2 * n2 + m)
            / (math.factorial(n2) * math.factorial(n2 + m)))
    expo = 3.0 * (model.parabolic_n1 - model.parabolic_n2) - alpha / f
    rate_au = pref * math.exp(expo)
    rate_ns = rate_au / model.units.time_unit_ns
    return min(rate_ns, 1.0 / model.bohr_period_ns)


def ionization_rate_ground(binding_energy_mev: float, field_v_um: float,
                           tunneling_mass_ratio: float = 1.0,
                           charge: float = 1.0,
                           units: EffectiveAtomicUnits = None,
                           field_calibration: float = FIELD_CALIBRATION_DEFAULT) -> float:
    """(omega alpha / F) exp(-alpha / F) for a nodeless state (1/ns)."""
    model = IonizationModel(
        principal_n=1, magnetic_m=0, parabolic_n1=0, parabolic_n2=0,
        binding_energy_mev=binding_energy_mev, charge=charge,
        tunneling_mass_ratio=tunneling_mass_ratio,
        units=units or EffectiveAtomicUnits.for_silicon(),
        field_calibration=field_calibration,
    )
    return ionization_rate_excited(model, field_v_um)


def ionization_probability(rate_per_ns: float, lifetime_ns: float) -> float:
    """Escape probability within one lifetime: 1 - exp(-lifetime rate)."""
    if lifetime_ns <= 0:
        raise ValueError("lifetime must be positive")
    return 1.0 - math.exp(-lifetime_ns * max(rate_per_ns, 0.0))


def max_applicable_field(model: IonizationModel, lifetime_ns: float,
                         probability_budget: float = 0.1,
                         tol: float = 1e-4) -> float:
    """Largest field (V/um) whose ionization probability within one
    lifetime stays at or below the budget; capped at the classical
    threshold (probability is monotone in field, so plain bisection)."""
    if not 0.0 < probability_budget < 1.0:
        raise ValueError("probability budget must be in (0, 1)")
    cap = model.classical_threshold_v_um

    def prob(f):
        return ionization_probability(ionization_rate_excited(model, f), lifetime_ns)

    if prob(cap) <= probability_budget:
        return cap
    lo, hi = 0.0, cap
    while hi - lo > tol * cap:
        mid = 0.5 * (lo + hi)
        if prob(mid) <= probability_budget:
            lo = mid
        else:
            hi = mid
    return lo


def ionization_model_for(species: DonorSpecies,
                         level: str = None,
                         units: EffectiveAtomicUnits = None,
                         field_calibration: float = FIELD_CALIBRATION_DEFAULT) -> IonizationModel:
    """Quantum numbers and binding energy for a species level.

    ``level``: the species' excited-state label (default), or "1sA" for
    the ground state.
    """
    units = units or EffectiveAtomicUnits.for_silicon()
    level = level or species.rydberg_state_label
    if level == "1sA":
        e_b, (n, m, n1, n2) = species.ground_binding_mev, (1, 0, 0, 0)
    elif level == "2p0":
        e_b, (n, m, n1, n2) = species.rydberg_binding_mev, (2, 0, 1, 0)
    elif level == "1sT2":
        e_b, (n, m, n1, n2) = species.rydberg_binding_mev, (1, 0, 0, 0)
    else:
        raise ConfigError(f"no ionization quantum numbers for level {level!r}")
    return IonizationModel(
        principal_n=n, magnetic_m=m, parabolic_n1=n1, parabolic_n2=n2,
        binding_energy_mev=e_b, charge=species.effective_charge,
        units=units, field_calibration=field_calibration,
    )
