"""Physical constants, effective atomic units and the donor species table.

Boundary units throughout the package: lengths in nm, energies in meV,
electric fields in V/um, times in ns.  The envelope solver and the
interaction integrals work in effective atomic units derived from the
transverse effective mass and the silicon dielectric constant; the gate
dynamics modules work in units of the spontaneous-emission rate.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import DimensionMismatch, UnknownSpecies

# CODATA values in the package boundary units (nm, meV, V/um, ns)
HBAR_MEV_NS = 6.582119569e-4        # hbar [meV ns]
BOHR_RADIUS_NM = 0.0529177210903    # hydrogen Bohr radius [nm]
HARTREE_MEV = 27211.386245988       # hydrogen Hartree [meV]
DEBYE_E_NM = 0.020819434            # 1 Debye [e nm]


@dataclass(frozen=True)
class PhysicalConstants:
    """Material constants of the silicon host.

    The conduction-band masses follow the standard silicon assignment
    m_l = 0.916 m_e (heavy, along the valley axis) and m_t = 0.191 m_e
    (light, transverse); only this assignment produces prolate donor
    wavefunctions and the tabulated 2p0 transition energies.
    """

    hbar_mev_ns: float = HBAR_MEV_NS
    electron_charge: float = 1.0                # e, unit charge in e
    silicon_dielectric: float = 11.4            # eps_S
    transverse_mass_ratio: float = 0.191        # m_t / m_e
    longitudinal_mass_ratio: float = 0.916      # m_l / m_e
    silicon_lattice_constant_nm: float = 0.5431

    def __post_init__(self):
        if not 0.0 < self.transverse_mass_ratio < self.longitudinal_mass_ratio < 1.0:
            raise ValueError("expected 0 < m_t < m_l < 1 (in electron masses)")

    @property
    def anisotropy_ratio(self) -> float:
        """gamma_m = m_t / m_l, about 0.2085 in silicon."""
        return self.transverse_mass_ratio / self.longitudinal_mass_ratio

    @property
    def valley_wavevector_nm(self) -> float:
        """Conduction-band valley position k0 = 0.85 * (2 pi / a) [1/nm]."""
        import math

        return 0.85 * 2.0 * math.pi / self.silicon_lattice_constant_nm


@dataclass(frozen=True)
class EffectiveAtomicUnits:
    """Effective atomic units for the donor envelope problem.

    bohr_radius ~ 3.16 nm and hartree ~ 40 meV for silicon; the field
    unit is hartree / (e * bohr_radius), about 12.7 V/um.
    """

    bohr_radius_nm: float
    hartree_mev: float

    @classmethod
    def for_silicon(cls, constants: PhysicalConstants | None = None) -> "EffectiveAtomicUnits":
        c = constants or PhysicalConstants()
        a = BOHR_RADIUS_NM * c.silicon_dielectric / c.transverse_mass_ratio
        e = HARTREE_MEV * c.transverse_mass_ratio / c.silicon_dielectric**2
        return cls(bohr_radius_nm=a, hartree_mev=e)

    @property
    def field_unit_v_per_um(self) -> float:
        # meV / (e nm) == mV/nm == V/um
        return self.hartree_mev / self.bohr_radius_nm

    @property
    def time_unit_ns(self) -> float:
        return HBAR_MEV_NS / self.hartree_mev

    @property
    def dipole_unit_debye(self) -> float:
        # e * bohr_radius expressed in Debye
        return self.bohr_radius_nm / DEBYE_E_NM

    def _scale(self, dimension: str) -> float:
        scales = {
            "length": self.bohr_radius_nm,
            "energy": self.hartree_mev,
            "field": self.field_unit_v_per_um,
            "time": self.time_unit_ns,
        }
        try:
            return scales[dimension]
        except KeyError:
            raise DimensionMismatch(f"unsupported dimension {dimension!r}") from None

    def to_atomic(self, value: float, dimension: str) -> float:
        """Boundary units (nm / meV / V/um / ns) -> effective atomic units."""
        return value / self._scale(dimension)

    def from_atomic(self, value: float, dimension: str) -> float:
        """Effective atomic units -> boundary units (nm / meV / V/um / ns)."""
        return value * self._scale(dimension)


@dataclass(frozen=True)
class DecoherenceRates:
    """Jump rates of the gate simulation, in 1/ns unless rescaled."""

    gamma_se: float  # spontaneous emission |r> -> |1>
    gamma_de: float  # dephasing between |1> and |r>

    @classmethod
    def from_lifetime(cls, t1_ns: float) -> "DecoherenceRates":
        # dephasing at half the emission rate reproduces the measured
        # T2/T1 ratio of the 2p0 donor transition
        gamma = 1.0 / t1_ns
        return cls(gamma_se=gamma, gamma_de=0.5 * gamma)

    def scaled(self, factor: float) -> "DecoherenceRates":
        return DecoherenceRates(self.gamma_se * factor, self.gamma_de * factor)


@dataclass(frozen=True)
class DonorSpecies:
    """Tabulated parameters of one donor / excited-state choice."""

    name: str
    rydberg_state_label: str
    transition_dipole_debye: float
    transition_energy_mev: float
    lifetime_t1_ns: float
    coherence_t2_ns: float
    ground_binding_mev: float
    rydberg_binding_mev: float
    effective_charge: float = 1.0

    def __post_init__(self):
        if self.lifetime_t1_ns <= 0:
            raise ValueError("lifetime_T1 must be positive")
        if self.coherence_t2_ns > 2.0 * self.lifetime_t1_ns + 1e-12:
            raise ValueError("coherence_T2 cannot exceed 2 T1")

    def decoherence_rates(self) -> DecoherenceRates:
        return DecoherenceRates.from_lifetime(self.lifetime_t1_ns)


# Orbital excited-state parameters.  P and As share one 2p0 entry; the
# Se+ 2p0 lifetime is a conservative 1 ns assumption (no measurement).
_SPECIES = {
    ("P", "2p0"): DonorSpecies(
        name="P", rydberg_state_label="2p0",
        transition_dipole_debye=31.0, transition_energy_mev=34.0,
        lifetime_t1_ns=0.235, coherence_t2_ns=0.160,
        ground_binding_mev=45.59, rydberg_binding_mev=11.48,
        effective_charge=1.0,
    ),
    ("As", "2p0"): DonorSpecies(
        name="As", rydberg_state_label="2p0",
        transition_dipole_debye=31.0, transition_energy_mev=34.0,
        lifetime_t1_ns=0.235, coherence_t2_ns=0.160,
        ground_binding_mev=53.76, rydberg_binding_mev=11.48,
        effective_charge=1.0,
    ),
    ("Se+", "1sT2"): DonorSpecies(
        name="Se+", rydberg_state_label="1sT2",
        transition_dipole_debye=1.96, transition_energy_mev=427.0,
        lifetime_t1_ns=7.7, coherence_t2_ns=7.7,
        ground_binding_mev=593.0, rydberg_binding_mev=166.0,
        effective_charge=2.0,
    ),
    ("Se+", "2p0"): DonorSpecies(
        name="Se+", rydberg_state_label="2p0",
        transition_dipole_debye=0.97, transition_energy_mev=548.0,
        lifetime_t1_ns=1.0, coherence_t2_ns=2.0,
        ground_binding_mev=593.0, rydberg_binding_mev=45.0,
        effective_charge=2.0,
    ),
}

_FIELD_ALIASES = {
    "transition_dipole_debye": float,
    "transition_energy_mev": float,
    "lifetime_t1_ns": float,
    "coherence_t2_ns": float,
    "ground_binding_mev": float,
    "rydberg_binding_mev": float,
    "effective_charge": float,
}


def species_lookup(name: str, rydberg_state: str) -> DonorSpecies:
    """Return the tabulated parameter set for (donor, excited state)."""
    try:
        return _SPECIES[(name, rydberg_state)]
    except KeyError:
        known = ", ".join(f"{n}/{r}" for n, r in sorted(_SPECIES))
        raise UnknownSpecies(
            f"no tabulated parameters for {name}/{rydberg_state} (known: {known})"
        ) from None


def load_species_table(path) -> dict:
    """Parse species overrides from a plain-text key-value file.

    Format: one ``[Name/state]`` section per species, ``key = value``
    lines using the DonorSpecies field names.  Unlisted fields keep the
    compiled-in defaults; unknown species sections must list all fields.
    """
    import configparser

    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)

    table = dict(_SPECIES)
    for section in parser.sections():
        if "/" not in section:
            raise UnknownSpecies(f"species section {section!r} must be Name/state")
        name, state = section.split("/", 1)
        overrides = {}
        for key, raw in parser.items(section):
            if key not in _FIELD_ALIASES:
                raise UnknownSpecies(f"unknown species field {key!r} in [{section}]")
            overrides[key] = _FIELD_ALIASES[key](raw)
        base = table.get((name, state))
        if base is None:
            overrides.setdefault("effective_charge", 1.0)
            table[(name, state)] = DonorSpecies(
                name=name, rydberg_state_label=state, **overrides
            )
        else:
            table[(name, state)] = replace(base, **overrides)
    return table
