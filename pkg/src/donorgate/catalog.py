"""Eigenstate catalog: the solved envelopes and multivalley states of one
donor species, persisted to disk for reuse.

The m = 0 even (s-like) sector is solved once per valley manifold with
its own central-cell depth: the A1 depth is calibrated against the
tabulated binding data, the E and T2 sectors default to no correction
unless the excited state itself lives there (Se+ 1sT2).  Sectors with
no core weight (p0, p+-, d+-) share one correction-free solve across
all manifold members.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .envelope import (
    PARITY_EVEN,
    PARITY_ODD,
    CentralCell,
    EnvelopeState,
    SolverConfig,
    assemble_and_solve,
    calibrate_central_cell,
)
from .errors import CatalogInsufficient, ConfigError
from .multivalley import (
    MANIFOLD_VECTORS,
    MultivalleyWavefunction,
    ValleyManifold,
    build_multivalley,
    dipole_vector,
    t2_member_for_axis,
)
from .units import DonorSpecies, EffectiveAtomicUnits, PhysicalConstants, species_lookup

CATALOG_FORMAT_VERSION = 1

# (sector key, m, parity); the s sector appears once per manifold tag
_S_SECTOR = "s"
_P0_SECTOR = "p0"
_PPM_SECTOR = "ppm"
_DPM_SECTOR = "dpm"

_T2_AXSTR = {"0": "x", "1": "y", "2": "z"}


@dataclass(frozen=True)
class CatalogBuildConfig:
    species_name: str = "P"
    rydberg_state: str = "2p0"
    mesh: tuple = (128, 96)
    scaling_radius: float = None        # a_B*, default 3.0 / Z
    core_radius_nm: float = 0.3
    states_per_sector: int = 6
    norm_samples: int = 30_000
    seed: int = 1337
    cc_rtol: float = 2e-4
    cc_target_e_mev: float = None       # optional E-manifold 1s binding
    cc_target_t2_mev: float = None      # optional T2-manifold 1s binding

    def resolved_radius(self, charge: float) -> float:
        return self.scaling_radius if self.scaling_radius is not None else 3.0 / charge

    def content_key(self) -> str:
        payload = json.dumps({
            "species": self.species_name, "rydberg": self.rydberg_state,
            "mesh": list(self.mesh), "r0": self.scaling_radius,
            "rc_nm": self.core_radius_nm, "k": self.states_per_sector,
            "norm_samples": self.norm_samples, "seed": self.seed,
            "cc_rtol": self.cc_rtol, "cc_e": self.cc_target_e_mev,
            "cc_t2": self.cc_target_t2_mev,
            "version": CATALOG_FORMAT_VERSION,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class CatalogState:
    label: str
    envelope_key: str
    envelope_index: int
    manifold_label: str
    manifold_member: int
    energy: float               # effective Hartree
    norm_factor: float = 1.0
    m_sign: int = 1             # sign applied to the envelope's |m|


@dataclass
class Catalog:
    species: DonorSpecies
    gamma: float
    scaling_radius: float
    mesh: tuple
    valley_wavevector: float    # 1 / a_B*
    charge: float
    cc_depths: dict             # manifold tag -> depth (E_H)
    cc_radius: float            # a_B*
    envelopes: dict             # key -> list[EnvelopeState]
    states: list = field(default_factory=list)
    content_hash: str = ""
    units: EffectiveAtomicUnits = field(default_factory=EffectiveAtomicUnits.for_silicon)

    # -- state access --------------------------------------------------

    def state_by_label(self, label: str) -> CatalogState:
        for s in self.states:
            if s.label == label:
                return s
        raise CatalogInsufficient(f"state {label!r} not in catalog")

    def wavefunction(self, state: CatalogState) -> MultivalleyWavefunction:
        env = self.envelopes[state.envelope_key][state.envelope_index]
        if state.m_sign < 0 and env.m != 0:
            env = replace(env, m=-env.m)
        return MultivalleyWavefunction(
            envelope=env,
            manifold=ValleyManifold(state.manifold_label, state.manifold_member),
            valley_wavevector=self.valley_wavevector,
            energy=state.energy,
            norm_factor=state.norm_factor,
            label=state.label,
        )

    def ground_label(self) -> str:
        return "1s:A1"

    def rydberg_label(self) -> str:
        if self.species.rydberg_state_label == "2p0":
            return "2p0:A1"
        if self.species.rydberg_state_label == "1sT2":
            return "1s:T2z"
        raise CatalogInsufficient(
            f"no state mapping for {self.species.rydberg_state_label!r}")

    def ground_state(self) -> CatalogState:
        return self.state_by_label(self.ground_label())

    def rydberg_state(self) -> CatalogState:
        return self.state_by_label(self.rydberg_label())

    def transition_energy_mev(self) -> float:
        gap = self.rydberg_state().energy - self.ground_state().energy
        return gap * self.units.hartree_mev

    def dipoles_from(self, state: CatalogState) -> list:
        """(other_state, <state| r |other>) for every catalog state with a
        non-vanishing element."""
        psi = self.wavefunction(state)
        out = []
        for other in self.states:
            d = dipole_vector(psi, self.wavefunction(other))
            if np.any(np.abs(d) > 1e-12):
                out.append((other, d))
        return out


def _sector_solves(species: DonorSpecies, build: CatalogBuildConfig,
                   units: EffectiveAtomicUnits, constants: PhysicalConstants):
    """Calibrate the central cell and run every sector eigensolve."""
    gamma = constants.anisotropy_ratio
    charge = species.effective_charge
    r0 = build.resolved_radius(charge)
    rc = build.core_radius_nm / units.bohr_radius_nm
    k = build.states_per_sector

    base = SolverConfig(
        anisotropy_ratio=gamma, magnetic_quantum_number=0,
        theta_parity=PARITY_ODD, scaling_radius=r0, mesh=build.mesh,
        eigenpair_count=k, effective_charge=charge,
    )

    p0_states = assemble_and_solve(base)
    e_2p0 = p0_states[0].energy

    # central-cell targets (positive bindings, effective Hartree)
    transition = species.transition_energy_mev / units.hartree_mev
    if species.rydberg_state_label == "2p0":
        # pin the A1 ground exactly one transition below the solved 2p0
        target_a1 = abs(e_2p0) + transition
    else:
        target_a1 = species.ground_binding_mev / units.hartree_mev

    even = replace(base, theta_parity=PARITY_EVEN)
    cc_depths = {"A1": calibrate_central_cell(target_a1, rc, even, rtol=build.cc_rtol)}

    if build.cc_target_e_mev is not None:
        cc_depths["E"] = calibrate_central_cell(
            build.cc_target_e_mev / units.hartree_mev, rc, even, rtol=build.cc_rtol)
    else:
        cc_depths["E"] = 0.0

    if species.rydberg_state_label == "1sT2":
        target_t2 = target_a1 - transition
        cc_depths["T2"] = calibrate_central_cell(target_t2, rc, even, rtol=build.cc_rtol)
    elif build.cc_target_t2_mev is not None:
        cc_depths["T2"] = calibrate_central_cell(
            build.cc_target_t2_mev / units.hartree_mev, rc, even, rtol=build.cc_rtol)
    else:
        cc_depths["T2"] = 0.0

    envelopes = {}
    for tag in ("A1", "E", "T2"):
        cfg = replace(even, central_cell=CentralCell(depth=cc_depths[tag], radius=rc))
        envelopes[f"{_S_SECTOR}:{tag}"] = assemble_and_solve(cfg)
    envelopes[_P0_SECTOR] = p0_states
    envelopes[_PPM_SECTOR] = assemble_and_solve(
        replace(base, magnetic_quantum_number=1, theta_parity=PARITY_EVEN))
    envelopes[_DPM_SECTOR] = assemble_and_solve(
        replace(base, magnetic_quantum_number=1, theta_parity=PARITY_ODD))
    return envelopes, cc_depths, rc, r0


def _sector_names(key: str, idx: int) -> str:
    if key.startswith(_S_SECTOR):
        return f"{idx + 1}s"
    if key == _P0_SECTOR:
        return f"{idx + 2}p0"
    if key == _PPM_SECTOR:
        return f"{idx + 2}p+" if idx >= 0 else "?"
    if key == _DPM_SECTOR:
        return f"{idx + 3}d+"
    return f"{key}{idx}"


def _manifold_tag(label: str, member: int) -> str:
    if label == "T2":
        return f"T2{_T2_AXSTR[str(member)]}"
    if label == "pair":
        return f"pair{_T2_AXSTR[str(member)]}"
    if label == "E":
        return f"E{member}"
    return label


def build_catalog(build: CatalogBuildConfig,
                  constants: PhysicalConstants = None,
                  species_table: dict = None) -> Catalog:
    """Solve every sector and assemble the full multivalley state list."""
    constants = constants or PhysicalConstants()
    units = EffectiveAtomicUnits.for_silicon(constants)
    if species_table is not None:
        try:
            species = species_table[(build.species_name, build.rydberg_state)]
        except KeyError:
            raise ConfigError(
                f"{build.species_name}/{build.rydberg_state} absent from species table")
    else:
        species = species_lookup(build.species_name, build.rydberg_state)

    envelopes, cc_depths, rc, r0 = _sector_solves(species, build, units, constants)
    k0 = constants.valley_wavevector_nm * units.bohr_radius_nm

    cat = Catalog(
        species=species, gamma=constants.anisotropy_ratio,
        scaling_radius=r0, mesh=build.mesh, valley_wavevector=k0,
        charge=species.effective_charge, cc_depths=cc_depths, cc_radius=rc,
        envelopes=envelopes, states=[], content_hash=build.content_key(),
        units=units,
    )

    # enumerate (envelope, manifold member, signed m) states
    seed_counter = build.seed
    manifold_members = [("A1", 0), ("E", 0), ("E", 1),
                        ("T2", 0), ("T2", 1), ("T2", 2)]

    def add_states(env_key, env_list, members, signed_m):
        nonlocal seed_counter
        for idx, env in enumerate(env_list):
            for label, member in members:
                # |psi|^2 is independent of sign(m): normalize once
                psi = build_multivalley(
                    env, ValleyManifold(label, member), k0,
                    mc_samples=build.norm_samples, seed=seed_counter,
                )
                seed_counter += 1
                for m_sign in signed_m:
                    name = _sector_names(env_key, idx)
                    if m_sign < 0:
                        name = name.replace("+", "-")
                    cat.states.append(CatalogState(
                        label=f"{name}:{_manifold_tag(label, member)}",
                        envelope_key=env_key, envelope_index=idx,
                        manifold_label=label, manifold_member=member,
                        energy=env.energy, norm_factor=psi.norm_factor,
                        m_sign=m_sign,
                    ))

    for tag in ("A1", "E", "T2"):
        key = f"{_S_SECTOR}:{tag}"
        members = [(l, m) for (l, m) in manifold_members if l == tag]
        add_states(key, envelopes[key], members, (1,))
    add_states(_P0_SECTOR, envelopes[_P0_SECTOR], manifold_members, (1,))
    add_states(_PPM_SECTOR, envelopes[_PPM_SECTOR], manifold_members, (1, -1))
    add_states(_DPM_SECTOR, envelopes[_DPM_SECTOR], manifold_members, (1, -1))
    return cat


def catalog_state_count(cat: Catalog) -> int:
    return len(cat.states)


# -- persistence ------------------------------------------------------------


def save_catalog(cat: Catalog, path) -> None:
    header = {
        "format_version": CATALOG_FORMAT_VERSION,
        "content_hash": cat.content_hash,
        "species": {
            "name": cat.species.name,
            "rydberg_state_label": cat.species.rydberg_state_label,
            "transition_dipole_debye": cat.species.transition_dipole_debye,
            "transition_energy_mev": cat.species.transition_energy_mev,
            "lifetime_t1_ns": cat.species.lifetime_t1_ns,
            "coherence_t2_ns": cat.species.coherence_t2_ns,
            "ground_binding_mev": cat.species.ground_binding_mev,
            "rydberg_binding_mev": cat.species.rydberg_binding_mev,
            "effective_charge": cat.species.effective_charge,
        },
        "units": "lengths a_B*, energies E_H*",
        "gamma": cat.gamma,
        "scaling_radius": cat.scaling_radius,
        "mesh": list(cat.mesh),
        "valley_wavevector": cat.valley_wavevector,
        "charge": cat.charge,
        "cc_depths": cat.cc_depths,
        "cc_radius": cat.cc_radius,
        "envelope_keys": list(cat.envelopes.keys()),
        "states": [
            {
                "label": s.label, "envelope_key": s.envelope_key,
                "envelope_index": s.envelope_index,
                "manifold_label": s.manifold_label,
                "manifold_member": s.manifold_member,
                "energy": s.energy, "norm_factor": s.norm_factor,
                "m_sign": s.m_sign,
            }
            for s in cat.states
        ],
    }
    arrays = {"header_json": np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)}
    for key, env_list in cat.envelopes.items():
        metas = []
        for i, env in enumerate(env_list):
            arrays[f"env::{key}::{i}"] = env.y
            metas.append({
                "energy": env.energy, "m": env.m, "parity": env.parity,
                "scaling_radius": env.scaling_radius,
                "anisotropy_ratio": env.anisotropy_ratio,
                "node_counts": list(env.node_counts),
                "norm_check": env.norm_check,
            })
        arrays[f"envmeta::{key}"] = np.frombuffer(
            json.dumps(metas, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_catalog(path) -> Catalog:
    with np.load(path) as data:
        header = json.loads(bytes(data["header_json"]).decode())
        if header["format_version"] != CATALOG_FORMAT_VERSION:
            raise ConfigError(
                f"catalog format {header['format_version']} unsupported")
        envelopes = {}
        for key in header["envelope_keys"]:
            metas = json.loads(bytes(data[f"envmeta::{key}"]).decode())
            env_list = []
            for i, meta in enumerate(metas):
                env_list.append(EnvelopeState(
                    energy=meta["energy"], y=data[f"env::{key}::{i}"],
                    m=meta["m"], parity=meta["parity"],
                    scaling_radius=meta["scaling_radius"],
                    anisotropy_ratio=meta["anisotropy_ratio"],
                    node_counts=tuple(meta["node_counts"]),
                    norm_check=meta["norm_check"],
                ))
            envelopes[key] = env_list
    sp = header["species"]
    species = DonorSpecies(
        name=sp["name"], rydberg_state_label=sp["rydberg_state_label"],
        transition_dipole_debye=sp["transition_dipole_debye"],
        transition_energy_mev=sp["transition_energy_mev"],
        lifetime_t1_ns=sp["lifetime_t1_ns"],
        coherence_t2_ns=sp["coherence_t2_ns"],
        ground_binding_mev=sp["ground_binding_mev"],
        rydberg_binding_mev=sp["rydberg_binding_mev"],
        effective_charge=sp["effective_charge"],
    )
    cat = Catalog(
        species=species, gamma=header["gamma"],
        scaling_radius=header["scaling_radius"], mesh=tuple(header["mesh"]),
        valley_wavevector=header["valley_wavevector"], charge=header["charge"],
        cc_depths=header["cc_depths"], cc_radius=header["cc_radius"],
        envelopes=envelopes, content_hash=header["content_hash"],
    )
    cat.states = [
        CatalogState(
            label=s["label"], envelope_key=s["envelope_key"],
            envelope_index=s["envelope_index"],
            manifold_label=s["manifold_label"],
            manifold_member=s["manifold_member"],
            energy=s["energy"], norm_factor=s["norm_factor"],
            m_sign=s.get("m_sign", 1),
        )
        for s in header["states"]
    ]
    return cat
