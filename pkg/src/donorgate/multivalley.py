"""Multivalley donor wavefunctions: envelopes x valley structure.

A donor state is a symmetry-adapted combination over the six conduction
band valleys (+x, -x, +y, -y, +z, -z).  Each opposite-valley pair
carries the plane-wave interference factor
alpha_+ e^{-i k0 c} + alpha_- e^{+i k0 c} (c = coordinate along the
axis), i.e. a cosine for same-sign pairs and a sine for opposite-sign
pairs; the lattice-periodic Bloch part is approximated by 1.  The
envelope attached to each axis is the single-valley solution with its
longitudinal direction rotated onto that axis.

Lengths in effective Bohr radii, energies in effective Hartree; the
valley wavevector k0 enters in the same length unit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import PARITY_FULL, EnvelopeState, evaluate_envelope, surface_quadrature
from .errors import NotConverged

VALLEY_ORDER = ("+x", "-x", "+y", "-y", "+z", "-z")

_SQ6 = math.sqrt(6.0)
_SQ2 = math.sqrt(2.0)
_SQ12 = math.sqrt(12.0)

MANIFOLD_VECTORS = {
    ("A1", 0): np.array([1, 1, 1, 1, 1, 1]) / _SQ6,
    ("E", 0): np.array([1, 1, -1, -1, 0, 0]) / 2.0,
    ("E", 1): np.array([1, 1, 1, 1, -2, -2]) / _SQ12,
    ("T2", 0): np.array([1, -1, 0, 0, 0, 0]) / _SQ2,
    ("T2", 1): np.array([0, 0, 1, -1, 0, 0]) / _SQ2,
    ("T2", 2): np.array([0, 0, 0, 0, 1, -1]) / _SQ2,
    # single-axis even pairs: the optically bright combinations of a
    # valley-degenerate manifold under axis-polarised light (equal to
    # (A1 - sqrt(2) E_z)/sqrt(3) etc.); never used as intermediate-sum
    # basis states, which stay {A1, E, T2}
    ("pair", 0): np.array([1, 1, 0, 0, 0, 0]) / _SQ2,
    ("pair", 1): np.array([0, 0, 1, 1, 0, 0]) / _SQ2,
    ("pair", 2): np.array([0, 0, 0, 0, 1, 1]) / _SQ2,
}

# local frame (e1, e2, e_long) of each valley axis, as rows of lab axes
_AXIS_FRAMES = {
    0: ((1, 2, 0)),  # x-axis valley: locals (y, z, x)
    1: ((2, 0, 1)),  # y-axis valley: locals (z, x, y)
    2: ((0, 1, 2)),  # z-axis valley: locals (x, y, z)
}


@dataclass(frozen=True)
class ValleyManifold:
    """Symmetry label plus the 6-component valley coefficient vector."""

    label: str
    member: int = 0

    def __post_init__(self):
        if (self.label, self.member) not in MANIFOLD_VECTORS:
            raise ValueError(f"unknown manifold {self.label}[{self.member}]")

    @property
    def coefficients(self) -> np.ndarray:
        return MANIFOLD_VECTORS[(self.label, self.member)]

    def axis_pairs(self) -> np.ndarray:
        """(3, 2) array of (alpha_+, alpha_-) per axis."""
        return self.coefficients.reshape(3, 2)

    def axis_weights(self) -> np.ndarray:
        """Probability weight of each axis, sum alpha^2 per pair."""
        pairs = self.axis_pairs()
        return (pairs**2).sum(axis=1)

    def bloch_parity(self) -> tuple:
        """'cosine' for same-sign pairs, 'sine' for opposite-sign, None
        for absent axes."""
        out = []
        for ap, am in self.axis_pairs():
            if ap == 0 and am == 0:
                out.append(None)
            elif abs(ap + am) > abs(ap - am):
                out.append("cosine")
            else:
                out.append("sine")
        return tuple(out)


def t2_member_for_axis(axis: str) -> ValleyManifold:
    return ValleyManifold("T2", {"x": 0, "y": 1, "z": 2}[axis])


def pair_member_for_axis(axis: str) -> ValleyManifold:
    return ValleyManifold("pair", {"x": 0, "y": 1, "z": 2}[axis])


def _local_coords(points: np.ndarray, axis: int) -> np.ndarray:
    i1, i2, il = _AXIS_FRAMES[axis]
    return np.stack([points[..., i1], points[..., i2], points[..., il]], axis=-1)


@dataclass
class MultivalleyWavefunction:
    """Envelope + valley coefficients + plane-wave factors, evaluable at
    3D points (lengths in effective Bohr radii)."""

    envelope: EnvelopeState
    manifold: ValleyManifold
    valley_wavevector: float
    energy: float = None
    norm_factor: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.energy is None:
            self.energy = self.envelope.energy

    def evaluate(self, points: np.ndarray, center: np.ndarray = None) -> np.ndarray:
        """Complex amplitude at lab points; ``center`` shifts the donor
        (envelope and interference factors move together)."""
        pts = np.asarray(points, dtype=float)
        scalar = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if center is not None:
            pts = pts - np.asarray(center, dtype=float)

        out = np.zeros(pts.shape[0], dtype=complex)
        pairs = self.manifold.axis_pairs()
        k0 = self.valley_wavevector
        for axis in range(3):
            ap, am = pairs[axis]
            if ap == 0.0 and am == 0.0:
                continue
            loc = _local_coords(pts, axis)
            env = evaluate_envelope(self.envelope, loc)
            c = loc[:, 2]
            factor = (ap + am) * np.cos(k0 * c) - 1j * (ap - am) * np.sin(k0 * c)
            out += env * factor
        out *= self.norm_factor
        return out[0] if scalar else out

    def density(self, points: np.ndarray, center: np.ndarray = None) -> np.ndarray:
        amp = self.evaluate(points, center)
        return np.abs(np.atleast_1d(amp))**2


class EnvelopeSampler:
    """Samples 3D points from one axis-envelope |F|^2 via the (eta, theta)
    cell distribution of y^2, with an exactly known proposal density."""

    def __init__(self, envelope: EnvelopeState):
        self.envelope = envelope
        y = envelope.y
        n_eta = y.shape[0] - 1
        n_theta = y.shape[1] - 1
        self.n_eta, self.n_theta = n_eta, n_theta
        self.h_eta = (math.pi / 2.0) / n_eta
        self.h_theta = envelope.theta_max / n_theta
        self.gamma = envelope.anisotropy_ratio
        self.r0 = envelope.scaling_radius
        self.half_domain = envelope.parity != PARITY_FULL

        # cell masses of y^2 (eta, theta) with the dr' sin(theta) measure,
        # midpoint-quadrature; any positive weights give a valid proposal
        eta_mid = (np.arange(n_eta) + 0.5) * self.h_eta
        th_mid = (np.arange(n_theta) + 0.5) * self.h_theta
        y_mid = 0.25 * (y[:-1, :-1] + y[1:, :-1] + y[:-1, 1:] + y[1:, 1:])
        meas = ((self.r0 / np.cos(eta_mid)**2)[:, None] * np.sin(th_mid)[None, :])
        masses = (y_mid**2 * meas).ravel()
        masses = np.maximum(masses, 0.0)
        total = masses.sum()
        if not np.isfinite(total) or total <= 0:
            raise NotConverged("envelope surface has no usable probability mass")
        self.cell_prob = masses / total
        self.cum_prob = np.cumsum(self.cell_prob)
        self.cell_area = self.h_eta * self.h_theta

    def sample_local(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n points in the valley-local frame (longitudinal axis = z)."""
        cells = np.searchsorted(self.cum_prob, rng.random(n), side="right")
        ci, cj = np.divmod(cells, self.n_theta)
        eta = (ci + rng.random(n)) * self.h_eta
        theta = (cj + rng.random(n)) * self.h_theta
        if self.half_domain:
            flip = rng.random(n) < 0.5
            theta = np.where(flip, math.pi - theta, theta)
        phi = rng.random(n) * 2.0 * math.pi
        rp = self.r0 * np.tan(eta)
        rho = rp * np.sin(theta)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi),
                         math.sqrt(self.gamma) * rp * np.cos(theta)], axis=1)

    def proposal_density_local(self, points_local: np.ndarray) -> np.ndarray:
        """Exact 3D density of sample_local at local points."""
        p = np.atleast_2d(points_local)
        rho = np.hypot(p[:, 0], p[:, 1])
        zp = p[:, 2] / math.sqrt(self.gamma)
        rp = np.hypot(rho, zp)
        theta = np.arctan2(rho, zp)
        eta = np.arctan2(rp, self.r0)

        theta_fold = theta
        if self.half_domain:
            theta_fold = np.where(theta > math.pi / 2.0, math.pi - theta, theta)

        i = np.clip((eta / self.h_eta).astype(int), 0, self.n_eta - 1)
        j = np.clip((theta_fold / self.h_theta).astype(int), 0, self.n_theta - 1)
        prob = self.cell_prob[i * self.n_theta + j]
        if self.half_domain:
            prob = prob * 0.5

        jac = (math.sqrt(self.gamma) * np.maximum(rp, 1e-300)**2
               * np.maximum(np.sin(theta), 1e-300)
               * self.r0 / np.maximum(np.cos(eta), 1e-300)**2)
        return prob / (self.cell_area * 2.0 * math.pi * jac)


class WavefunctionSampler:
    """Importance sampler for |psi|^2 of a multivalley state: mixture of
    the axis-envelope densities with the manifold axis weights."""

    def __init__(self, psi: MultivalleyWavefunction):
        self.psi = psi
        self.weights = psi.manifold.axis_weights()
        self.active = [a for a in range(3) if self.weights[a] > 0]
        self.sampler = EnvelopeSampler(psi.envelope)

    def sample(self, n: int, rng: np.random.Generator,
               center: np.ndarray = None) -> np.ndarray:
        w = self.weights[self.active]
        w = w / w.sum()
        counts = rng.multinomial(n, w)
        chunks = []
        for axis, cnt in zip(self.active, counts):
            if cnt == 0:
                continue
            loc = self.sampler.sample_local(cnt, rng)
            i1, i2, il = _AXIS_FRAMES[axis]
            lab = np.empty_like(loc)
            lab[:, i1] = loc[:, 0]
            lab[:, i2] = loc[:, 1]
            lab[:, il] = loc[:, 2]
            chunks.append(lab)
        pts = np.concatenate(chunks, axis=0)
        rng.shuffle(pts)
        if center is not None:
            pts = pts + np.asarray(center, dtype=float)
        return pts

    def proposal_density(self, points: np.ndarray,
                         center: np.ndarray = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if center is not None:
            pts = pts - np.asarray(center, dtype=float)
        w = self.weights[self.active]
        w = w / w.sum()
        dens = np.zeros(pts.shape[0])
        for axis, wa in zip(self.active, w):
            dens += wa * self.sampler.proposal_density_local(_local_coords(pts, axis))
        return dens

    def density_weight(self, points: np.ndarray,
                       center: np.ndarray = None) -> np.ndarray:
        """|psi|^2 / proposal at lab points (importance weights)."""
        return self.psi.density(points, center) / self.proposal_density(points, center)


def build_multivalley(
    envelope: EnvelopeState,
    manifold: ValleyManifold,
    valley_wavevector: float,
    energy: float = None,
    label: str = "",
    mc_samples: int = 200_000,
    seed: int = 20240913,
) -> MultivalleyWavefunction:
    """Attach valley structure to an envelope and Monte-Carlo normalize.

    The plane-wave factors make the naive norm exact up to cross-axis
    envelope overlap, so the renormalization factor stays close to 1.
    """
    if not np.isfinite(envelope.energy) or envelope.norm_check <= 0:
        raise NotConverged("envelope state is not usable")
    psi = MultivalleyWavefunction(
        envelope=envelope, manifold=manifold,
        valley_wavevector=valley_wavevector,
        energy=energy, norm_factor=1.0, label=label,
    )
    rng = np.random.default_rng(seed)
    sampler = WavefunctionSampler(psi)
    pts = sampler.sample(mc_samples, rng)
    norm_sq = float(np.mean(sampler.density_weight(pts)))
    if not 0.25 <= norm_sq <= 4.0:
        raise NotConverged(f"multivalley norm estimate {norm_sq:.3f} out of range")
    psi.norm_factor = 1.0 / math.sqrt(norm_sq)
    return psi


# -- dipole matrix elements ------------------------------------------------


def envelope_dipole_elements(a: EnvelopeState, b: EnvelopeState) -> tuple:
    """(longitudinal, transverse) reduced elements in one valley frame.

    longitudinal: <a| c |b> along the valley axis (requires m_a = m_b);
    transverse: the common magnitude T with <a| e1 |b> = T and
    <a| e2 |b> = -i sign(m_b - m_a) T (requires |m_b - m_a| = 1).
    """
    gamma = a.anisotropy_ratio
    dm = b.m - a.m
    longitudinal = 0.0
    transverse = 0.0
    if dm == 0:
        longitudinal = 2.0 * math.pi * gamma * surface_quadrature(a, b, "r_cos")
    elif abs(dm) == 1:
        transverse = math.sqrt(gamma) * math.pi * surface_quadrature(a, b, "r_sin")
    return longitudinal, transverse


def dipole_vector(state_a: MultivalleyWavefunction,
                  state_b: MultivalleyWavefunction) -> np.ndarray:
    """Lab-frame <a| r |b> (complex 3-vector, units of e a_B*).

    Same-valley terms only: cross-valley and opposite-valley integrands
    oscillate at the valley wavevector and are dropped.  The per-axis
    weight alpha+_a alpha+_b + alpha-_a alpha-_b enforces the Bloch
    parity selection automatically.
    """
    pairs_a = state_a.manifold.axis_pairs()
    pairs_b = state_b.manifold.axis_pairs()
    weights = (pairs_a * pairs_b).sum(axis=1)
    if not np.any(weights):
        return np.zeros(3, dtype=complex)

    longitudinal, transverse = envelope_dipole_elements(state_a.envelope,
                                                        state_b.envelope)
    if longitudinal == 0.0 and transverse == 0.0:
        return np.zeros(3, dtype=complex)

    dm = state_b.envelope.m - state_a.envelope.m
    local = np.zeros(3, dtype=complex)
    if dm == 0:
        local[2] = longitudinal
    else:
        local[0] = transverse
        local[1] = -1j * math.copysign(1.0, dm) * transverse

    out = np.zeros(3, dtype=complex)
    scale = state_a.norm_factor * state_b.norm_factor
    for axis in range(3):
        if weights[axis] == 0.0:
            continue
        i1, i2, il = _AXIS_FRAMES[axis]
        vec = np.zeros(3, dtype=complex)
        vec[i1] = local[0]
        vec[i2] = local[1]
        vec[il] = local[2]
        out += weights[axis] * vec
    return out * scale
