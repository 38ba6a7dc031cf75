"""Donor-donor interaction channels and the total pair shift u.

Channels between two donors at displacement R (donor 1 at the origin):

* W: direct density-density Coulomb repulsion, 6D importance-sampled
  Monte Carlo; only the combination W_rr - 2 W_rg + W_gg survives in u
  (monopole terms cancel).
* J: two-electron exchange integral, Monte Carlo with a symmetrized
  proposal that keeps the importance weights bounded.
* V_dd: first-order dipole-dipole energy of field-induced dipoles.
* V_vdw: second-order dipole-dipole (Van der Waals) sum over catalog
  pair states.

Lengths at the public boundary are nm, energies meV, fields V/um;
internally everything runs in effective atomic units where the Coulomb
prefactor is 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog, CatalogState
from .errors import GuardViolation, NearDegeneracy, ZeroSeparation
from .multivalley import MultivalleyWavefunction, WavefunctionSampler, dipole_vector

DEFAULT_GUARD_NM = 8.0
DEFAULT_SAMPLES = 100_000
VDW_ENERGY_FLOOR_MEV = 0.01
_N_BATCHES = 25


@dataclass(frozen=True)
class DonorPairGeometry:
    """Displacement of donor 2 from donor 1 plus the applied field."""

    displacement_nm: tuple
    field_v_um: tuple = (0.0, 0.0, 0.0)
    polarization_axis: tuple = (0.0, 0.0, 1.0)
    guard_nm: float = DEFAULT_GUARD_NM

    @property
    def separation_nm(self) -> float:
        return float(np.linalg.norm(self.displacement_nm))

    @property
    def field_magnitude(self) -> float:
        return float(np.linalg.norm(self.field_v_um))


@dataclass
class InteractionBreakdown:
    """Per-channel energies (meV) and the assembled total u."""

    w_rr: float = 0.0
    w_rg: float = 0.0
    w_gg: float = 0.0
    j_rr: float = 0.0
    v_vdw_rr: float = 0.0
    v_dd_rr: float = 0.0
    total_u: float = 0.0
    mc_errors: dict = field(default_factory=dict)
    vdw_excluded_terms: int = 0
    field_applied: bool = False
    separation_nm: float = 0.0

    @property
    def w_combination(self) -> float:
        return self.w_rr - 2.0 * self.w_rg + self.w_gg

    @property
    def total_error(self) -> float:
        e = self.mc_errors
        if self.field_applied:
            return math.hypot(e.get("j_rr", 0.0), 0.0)
        return math.sqrt(e.get("w_rr", 0.0)**2 + 4.0 * e.get("w_rg", 0.0)**2
                         + e.get("w_gg", 0.0)**2 + e.get("j_rr", 0.0)**2)


def _batch_ratio_error(num: np.ndarray, den1: np.ndarray, den2: np.ndarray) -> float:
    """Std error of mean(num)/(mean(den1) mean(den2)) from batch means."""
    n = len(num) // _N_BATCHES * _N_BATCHES
    bn = num[:n].reshape(_N_BATCHES, -1).mean(axis=1)
    b1 = den1[:n].reshape(_N_BATCHES, -1).mean(axis=1)
    b2 = den2[:n].reshape(_N_BATCHES, -1).mean(axis=1)
    vals = bn / (b1 * b2)
    return float(vals.std(ddof=1) / math.sqrt(_N_BATCHES))


def coulomb_repulsion(
    psi1: MultivalleyWavefunction,
    psi2: MultivalleyWavefunction,
    displacement: np.ndarray,
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator = None,
    guard: float = 0.0,
) -> tuple:
    """(W, sigma_W) in effective Hartree: <1/|r1 - r2|> over the two
    one-donor densities, donor 2 displaced by ``displacement`` (a_B*)."""
    if samples < 1_000:
        raise ValueError("coulomb_repulsion needs at least 1000 samples")
    R = np.asarray(displacement, dtype=float)
    if guard and np.linalg.norm(R) < guard:
        raise GuardViolation(f"separation {np.linalg.norm(R):.2f} < guard {guard:.2f}")
    rng = rng or np.random.default_rng(0)

    s1 = WavefunctionSampler(psi1)
    s2 = WavefunctionSampler(psi2)
    r1 = s1.sample(samples, rng)
    r2 = s2.sample(samples, rng, center=R)
    w1 = s1.density_weight(r1)
    w2 = s2.density_weight(r2, center=R)
    inv_d = 1.0 / np.maximum(np.linalg.norm(r1 - r2, axis=1), 1e-9)

    num = w1 * w2 * inv_d
    value = num.mean() / (w1.mean() * w2.mean())
    err = _batch_ratio_error(num, w1, w2)
    return float(value), err


def exchange(
    psi1: MultivalleyWavefunction,
    psi2: MultivalleyWavefunction,
    displacement: np.ndarray,
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator = None,
    guard: float = 0.0,
) -> tuple:
    """(J, sigma_J) in effective Hartree: the two-electron exchange
    integral with both electrons swapped between the donors.

    The proposal mixes the direct and swapped single-particle densities,
    which bounds the importance weights near the wavefunction nodes.
    """
    if samples < 1_000:
        raise ValueError("exchange needs at least 1000 samples")
    R = np.asarray(displacement, dtype=float)
    if guard and np.linalg.norm(R) < guard:
        raise GuardViolation(f"separation {np.linalg.norm(R):.2f} < guard {guard:.2f}")
    rng = rng or np.random.default_rng(0)

    s1 = WavefunctionSampler(psi1)
    s2 = WavefunctionSampler(psi2)
    half = samples // 2
    r1a = s1.sample(half, rng)
    r2a = s2.sample(half, rng, center=R)
    r1b = s2.sample(samples - half, rng, center=R)
    r2b = s1.sample(samples - half, rng)
    r1 = np.concatenate([r1a, r1b], axis=0)
    r2 = np.concatenate([r2a, r2b], axis=0)

    q = 0.5 * (s1.proposal_density(r1) * s2.proposal_density(r2, center=R)
               + s2.proposal_density(r1, center=R) * s1.proposal_density(r2))
    a = np.conj(psi1.evaluate(r1)) * np.conj(psi2.evaluate(r2, center=R))
    b = psi2.evaluate(r1, center=R) * psi1.evaluate(r2)
    inv_d = 1.0 / np.maximum(np.linalg.norm(r1 - r2, axis=1), 1e-9)

    vals = (a * b) * inv_d / q
    value = float(vals.real.mean())
    n = len(vals) // _N_BATCHES * _N_BATCHES
    batches = vals.real[:n].reshape(_N_BATCHES, -1).mean(axis=1)
    err = float(batches.std(ddof=1) / math.sqrt(_N_BATCHES))
    return value, err


def induced_dipole(p1: np.ndarray, p2: np.ndarray, displacement: np.ndarray) -> float:
    """First-order dipole-dipole energy (effective Hartree) of two
    permanent/induced dipoles p_i (e a_B*) at displacement R (a_B*)."""
    R = np.asarray(displacement, dtype=float)
    dist = np.linalg.norm(R)
    if dist == 0.0:
        raise ZeroSeparation("dipole-dipole energy undefined at zero separation")
    n = R / dist
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    return float((p1 @ p2 - 3.0 * (n @ p1) * (n @ p2)) / dist**3)


class VanDerWaalsSum:
    """Second-order dipole-dipole sum for a fixed initial pair state.

    Precomputes the dipole vectors from the initial state to every
    catalog state; evaluation per displacement is then a dense pair sum.
    """

    def __init__(self, catalog: Catalog, state: CatalogState = None,
                 energy_floor_mev: float = VDW_ENERGY_FLOOR_MEV,
                 max_states: int = None):
        self.catalog = catalog
        self.state = state or catalog.rydberg_state()
        self.energy_floor = energy_floor_mev / catalog.units.hartree_mev
        dipoles = catalog.dipoles_from(self.state)
        if max_states is not None and len(dipoles) > max_states:
            # keep the strongest couplings (by |d|^2 / gap)
            def strength(item):
                other, d = item
                gap = abs(other.energy - self.state.energy) + 1e-9
                return -float(np.vdot(d, d).real) / gap
            dipoles = sorted(dipoles, key=strength)[:max_states]
        self.partners = [s for s, _ in dipoles]
        self.d = np.array([d for _, d in dipoles])          # (N, 3) complex
        self.e = np.array([s.energy for s, _ in dipoles])   # (N,)
        self.excluded_terms = 0

    def evaluate(self, displacement: np.ndarray) -> float:
        """V_vdw (effective Hartree) at displacement R (a_B*); terms with
        pair-energy denominators below the floor are skipped and counted."""
        R = np.asarray(displacement, dtype=float)
        dist = np.linalg.norm(R)
        if dist == 0.0:
            raise ZeroSeparation("Van der Waals sum undefined at zero separation")
        if self.d.size == 0:
            return 0.0
        n = R / dist
        proj = self.d @ n
        m = (self.d @ self.d.T - 3.0 * np.outer(proj, proj)) / dist**3
        den = 2.0 * self.state.energy - np.add.outer(self.e, self.e)
        ok = np.abs(den) >= self.energy_floor
        self.excluded_terms = int(np.count_nonzero(~ok & (np.abs(m) > 0)))
        return float(np.sum(np.where(ok, np.abs(m)**2 / np.where(ok, den, 1.0), 0.0)))


def van_der_waals(catalog: Catalog, displacement_au: np.ndarray,
                  state: CatalogState = None,
                  energy_floor_mev: float = VDW_ENERGY_FLOOR_MEV) -> tuple:
    """(V_vdw in effective Hartree, number of excluded near-degenerate
    terms) for the doubly excited pair at displacement R (a_B*)."""
    if len(catalog.states) < 40:
        raise NearDegeneracy(
            f"catalog holds {len(catalog.states)} states; the second-order "
            "sum needs at least 40 per donor")
    calc = VanDerWaalsSum(catalog, state, energy_floor_mev)
    val = calc.evaluate(displacement_au)
    return val, calc.excluded_terms


def total_interaction(
    geometry: DonorPairGeometry,
    catalog: Catalog,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    vdw_calc: VanDerWaalsSum = None,
    rydberg_dipole_au: float = None,
) -> InteractionBreakdown:
    """All interaction channels at one displacement.

    Without a field u = (W_rr - 2 W_rg + W_gg) - J_rr + V_vdw_rr; with a
    field the W combination is replaced by the induced dipole-dipole
    energy as the leading term.  ``rydberg_dipole_au`` (e a_B*) is the
    field-induced dipole of the excited state; if omitted it is derived
    from the perturbative Stark response at the geometry's field.
    """
    units = catalog.units
    sep = geometry.separation_nm
    if sep < geometry.guard_nm:
        raise GuardViolation(
            f"separation {sep:.2f} nm inside the {geometry.guard_nm:.1f} nm guard")
    R = np.asarray(geometry.displacement_nm, dtype=float) / units.bohr_radius_nm

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD0]))
    psi_r = catalog.wavefunction(catalog.rydberg_state())
    psi_g = catalog.wavefunction(catalog.ground_state())

    out = InteractionBreakdown(separation_nm=sep)
    eh = units.hartree_mev
    errors = {}

    w_rr, e_rr = coulomb_repulsion(psi_r, psi_r, R, samples, rng)
    w_rg, e_rg = coulomb_repulsion(psi_r, psi_g, R, samples, rng)
    w_gg, e_gg = coulomb_repulsion(psi_g, psi_g, R, samples, rng)
    j_rr, e_j = exchange(psi_r, psi_r, R, samples, rng)
    out.w_rr, out.w_rg, out.w_gg = w_rr * eh, w_rg * eh, w_gg * eh
    out.j_rr = j_rr * eh
    errors.update(w_rr=e_rr * eh, w_rg=e_rg * eh, w_gg=e_gg * eh, j_rr=e_j * eh)

    calc = vdw_calc or VanDerWaalsSum(catalog)
    out.v_vdw_rr = calc.evaluate(R) * eh
    out.vdw_excluded_terms = calc.excluded_terms

    field_mag = geometry.field_magnitude
    if field_mag > 0.0:
        out.field_applied = True
        if rydberg_dipole_au is None:
            from .stark import induced_dipole_moment

            rydberg_dipole_au = induced_dipole_moment(
                catalog, catalog.rydberg_label(),
                field_v_um=field_mag,
                axis=np.asarray(geometry.field_v_um) / field_mag)
        axis = np.asarray(geometry.field_v_um, dtype=float) / field_mag
        p_vec = rydberg_dipole_au * axis
        out.v_dd_rr = induced_dipole(p_vec, p_vec, R) * eh
        out.total_u = out.v_dd_rr - out.j_rr + out.v_vdw_rr
    else:
        out.total_u = out.w_combination - out.j_rr + out.v_vdw_rr

    out.mc_errors = errors
    return out


def interaction_map(
    catalog: Catalog,
    plane: tuple = ("y", "z"),
    extent_nm: float = 16.0,
    grid_n: int = 17,
    field_v_um: tuple = (0.0, 0.0, 0.0),
    samples: int = 20_000,
    seed: int = 0,
    guard_nm: float = DEFAULT_GUARD_NM,
) -> dict:
    """total_u over donor-2 positions in a plane through donor 1.

    Returns axes plus rasters of u, the combined MC error and the guard
    mask; masked cells (inside the guard) carry NaN.  Cell seeds derive
    from (seed, cell index), so the raster is schedule-independent.
    """
    axis_index = {"x": 0, "y": 1, "z": 2}
    i1, i2 = axis_index[plane[0]], axis_index[plane[1]]
    coords = np.linspace(-extent_nm, extent_nm, grid_n)

    vdw_calc = VanDerWaalsSum(catalog)
    field_mag = float(np.linalg.norm(field_v_um))
    dipole_au = None
    if field_mag > 0.0:
        from .stark import induced_dipole_moment

        dipole_au = induced_dipole_moment(
            catalog, catalog.rydberg_label(), field_v_um=field_mag,
            axis=np.asarray(field_v_um) / field_mag)

    u = np.full((grid_n, grid_n), np.nan)
    err = np.full((grid_n, grid_n), np.nan)
    mask = np.zeros((grid_n, grid_n), dtype=bool)
    for a in range(grid_n):
        for b in range(grid_n):
            disp = [0.0, 0.0, 0.0]
            disp[i1] = coords[a]
            disp[i2] = coords[b]
            if math.hypot(coords[a], coords[b]) < guard_nm:
                mask[a, b] = True
                continue
            geom = DonorPairGeometry(
                displacement_nm=tuple(disp), field_v_um=tuple(field_v_um),
                guard_nm=guard_nm)
            cell_seed = int(np.random.SeedSequence([seed, a * grid_n + b])
                            .generate_state(1)[0])
            bd = total_interaction(geom, catalog, samples=samples,
                                   seed=cell_seed, vdw_calc=vdw_calc,
                                   rydberg_dipole_au=dipole_au)
            u[a, b] = bd.total_u
            err[a, b] = bd.total_error
    return {"axes": plane, "coords_nm": coords, "u_mev": u,
            "error_mev": err, "masked": mask, "guard_nm": guard_nm,
            "field_v_um": tuple(field_v_um)}
