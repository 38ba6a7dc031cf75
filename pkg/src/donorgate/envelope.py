"""Single-valley envelope eigensolver on the compressed polar mesh.

The anisotropic effective-mass problem (longitudinal axis = z, kinetic
anisotropy gamma = m_t/m_l) is reduced to two dimensions in four steps:
rescale z' = z/sqrt(gamma) to symmetrize the kinetic term, go to polar
coordinates (r', theta), factor out e^{i m phi} and a 1/r' radial
prefactor, and compress the radial half-line with r' = r0 tan(eta).
The remaining surface y(eta, theta) solves a generalized symmetric
eigenproblem A y = eps M y assembled with bilinear elements; Dirichlet
conditions hold at eta = 0 and eta = pi/2 and, for m != 0, on the polar
axis.  States of definite z-parity are solved on the half domain
theta in [0, pi/2]; an axial electric field breaks that parity and
forces the full theta domain.

All quantities in effective atomic units (lengths in a_B*, energies in
E_H*, fields in E_H*/(e a_B*)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import (
    BracketFailure,
    ConfigError,
    EigensolverFailure,
    MeshTooCoarse,
    StateCrossing,
)

PARITY_EVEN = "even"
PARITY_ODD = "odd"
PARITY_FULL = "full"

_GAUSS_NODES = np.array([0.5 - math.sqrt(3.0 / 5.0) / 2.0, 0.5,
                         0.5 + math.sqrt(3.0 / 5.0) / 2.0])
_GAUSS_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass(frozen=True)
class CentralCell:
    """Spherical square well at the core: V = depth for r < radius."""

    depth: float
    radius: float


@dataclass(frozen=True)
class AxialField:
    """Uniform field along the valley/polarisation axis, switched on
    outside the onset radius."""

    strength: float
    onset_radius: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    anisotropy_ratio: float = 1.0
    magnetic_quantum_number: int = 0
    theta_parity: str = PARITY_EVEN
    scaling_radius: float = 2.0
    mesh: tuple = (128, 96)
    central_cell: CentralCell | None = None
    axial_field: AxialField | None = None
    eigenpair_count: int = 6
    effective_charge: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.anisotropy_ratio <= 1.0:
            raise ConfigError("anisotropy_ratio must be in (0, 1]")
        if self.scaling_radius <= 0:
            raise ConfigError("scaling_radius must be positive")
        if self.mesh[0] < 32 or self.mesh[1] < 32:
            raise ConfigError("mesh must be at least 32x32")
        if self.theta_parity not in (PARITY_EVEN, PARITY_ODD, PARITY_FULL):
            raise ConfigError(f"unknown theta_parity {self.theta_parity!r}")
        if self.axial_field is not None and self.axial_field.strength != 0.0 \
                and self.theta_parity != PARITY_FULL:
            raise ConfigError("an axial field breaks z-parity; use theta_parity='full'")

    @property
    def theta_max(self) -> float:
        return math.pi if self.theta_parity == PARITY_FULL else math.pi / 2.0


@dataclass
class EnvelopeState:
    """One eigenpair: energy plus the y(eta, theta) surface.

    ``y`` includes boundary nodes and is scaled so the reconstructed 3D
    envelope has unit norm; ``norm_check`` records the discrete surface
    norm used for that scaling.
    """

    energy: float
    y: np.ndarray
    m: int
    parity: str
    scaling_radius: float
    anisotropy_ratio: float
    node_counts: tuple = (0, 0)
    norm_check: float = 1.0

    @property
    def theta_max(self) -> float:
        return math.pi if self.parity == PARITY_FULL else math.pi / 2.0

    @property
    def label(self) -> str:
        return f"m={self.m} {self.parity} nodes={self.node_counts}"


class _Discretization:
    """Mesh bookkeeping and the reusable operator blocks.

    A(depth, field) = base + depth * cc_block + field * field_block;
    M is the mass matrix.  Blocks carry the full node set; Dirichlet
    reduction happens at solve time.
    """

    def __init__(self, config: SolverConfig):
        self.config = config
        n_eta, n_theta = config.mesh
        self.n_eta, self.n_theta = n_eta, n_theta
        self.eta = np.linspace(0.0, math.pi / 2.0, n_eta + 1)
        self.theta = np.linspace(0.0, config.theta_max, n_theta + 1)
        self.h_eta = self.eta[1] - self.eta[0]
        self.h_theta = self.theta[1] - self.theta[0]
        self._build_quadrature()
        self._assemble()
        self._build_dof_map()

    # -- quadrature ---------------------------------------------------

    def _build_quadrature(self):
        cfg = self.config
        # tensor Gauss points per element, flattened to 9 per element
        ge, gw = _GAUSS_NODES, _GAUSS_WEIGHTS
        xi, zeta = np.meshgrid(ge, ge, indexing="ij")
        self._xi = xi.ravel()
        self._zeta = zeta.ravel()
        self._wq = np.outer(gw, gw).ravel() * self.h_eta * self.h_theta

        # bilinear shapes and gradients at the 9 reference points
        x, z = self._xi, self._zeta
        self._N = np.stack([(1 - x) * (1 - z), x * (1 - z), (1 - x) * z, x * z], axis=1)
        self._dNdeta = np.stack([-(1 - z), (1 - z), -z, z], axis=1) / self.h_eta
        self._dNdtheta = np.stack([-(1 - x), -x, (1 - x), x], axis=1) / self.h_theta

        e_eta = np.repeat(np.arange(self.n_eta), self.n_theta)
        e_theta = np.tile(np.arange(self.n_theta), self.n_eta)
        self._eta_q = self.eta[e_eta][:, None] + self._xi[None, :] * self.h_eta
        self._theta_q = self.theta[e_theta][:, None] + self._zeta[None, :] * self.h_theta

        stride = self.n_theta + 1
        first = e_eta * stride + e_theta
        self._conn = np.stack([first, first + stride, first + 1, first + stride + 1], axis=1)

        gamma = cfg.anisotropy_ratio
        eta, theta = self._eta_q, self._theta_q
        r0 = cfg.scaling_radius
        sin_eta = np.sin(eta)
        cos_eta = np.cos(eta)
        sin_theta = np.sin(theta)
        cos_theta = np.cos(theta)
        rp = r0 * np.tan(eta)
        s_theta = np.sqrt(1.0 - (1.0 - gamma) * cos_theta**2)

        self._w_mass = (r0 / cos_eta**2) * sin_theta
        self._c_eta = cos_eta**2 * sin_theta / (2.0 * r0)
        self._c_theta = sin_theta / (2.0 * r0 * sin_eta**2)
        self._q_m = 1.0 / (2.0 * r0 * sin_eta**2 * sin_theta)
        # Coulomb term -Z / r_phys, weighted by the mass weight
        coul = -cfg.effective_charge / (rp * s_theta)
        self._v_coul_w = coul * self._w_mass
        self._r_phys = rp * s_theta
        # unit-strength axial field e*E*z, z = sqrt(gamma) r' cos(theta)
        self._v_field_unit_w = math.sqrt(gamma) * rp * cos_theta * self._w_mass

    # -- assembly -----------------------------------------------------

    def _element_matrix(self, coef_grad_eta, coef_grad_theta, coef_val):
        """Local 4x4 blocks for all elements at once."""
        n_el = self._eta_q.shape[0]
        out = np.zeros((n_el, 4, 4))
        wq = self._wq
        if coef_grad_eta is not None:
            ge = coef_grad_eta * wq
            out += np.einsum("eq,qa,qb->eab", ge, self._dNdeta, self._dNdeta)
        if coef_grad_theta is not None:
            gt = coef_grad_theta * wq
            out += np.einsum("eq,qa,qb->eab", gt, self._dNdtheta, self._dNdtheta)
        if coef_val is not None:
            gv = coef_val * wq
            out += np.einsum("eq,qa,qb->eab", gv, self._N, self._N)
        return out

    def _scatter(self, local):
        rows = np.repeat(self._conn, 4, axis=1).ravel()
        cols = np.tile(self._conn, (1, 4)).ravel()
        n = (self.n_eta + 1) * (self.n_theta + 1)
        mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
        return mat.tocsr()

    def _assemble(self):
        cfg = self.config
        m2 = float(cfg.magnetic_quantum_number**2)
        val = self._v_coul_w.copy()
        if m2:
            val += m2 * self._q_m
        self.base = self._scatter(
            self._element_matrix(self._c_eta, self._c_theta, val))
        self.mass = self._scatter(
            self._element_matrix(None, None, self._w_mass))

        if cfg.central_cell is not None:
            inside = (self._r_phys < cfg.central_cell.radius).astype(float)
            self.cc_block = self._scatter(
                self._element_matrix(None, None, inside * self._w_mass))
        else:
            self.cc_block = None

        fld = cfg.axial_field
        if fld is not None:
            fw = self._v_field_unit_w
            if fld.onset_radius > 0.0:
                fw = fw * (self._r_phys >= fld.onset_radius)
            self.field_block = self._scatter(
                self._element_matrix(None, None, fw))
        else:
            self.field_block = None

    def _build_dof_map(self):
        cfg = self.config
        n_eta, n_theta = self.n_eta, self.n_theta
        keep = np.ones((n_eta + 1, n_theta + 1), dtype=bool)
        keep[0, :] = False            # r -> 0
        keep[-1, :] = False           # r -> infinity
        if cfg.magnetic_quantum_number != 0:
            keep[:, 0] = False        # polar axis
            if cfg.theta_parity == PARITY_FULL:
                keep[:, -1] = False
        if cfg.theta_parity == PARITY_ODD:
            keep[:, -1] = False       # midplane node of odd states
        self.keep = keep.ravel()
        self.free = np.flatnonzero(self.keep)

    # -- solving ------------------------------------------------------

    def operator(self, cc_depth: float = None, field_strength: float = None):
        cfg = self.config
        a = self.base
        if self.cc_block is not None:
            depth = cfg.central_cell.depth if cc_depth is None else cc_depth
            a = a + depth * self.cc_block
        if self.field_block is not None:
            f = cfg.axial_field.strength if field_strength is None else field_strength
            a = a + f * self.field_block
        return a

    def solve(self, k: int = None, cc_depth: float = None,
              field_strength: float = None, sigma: float = None):
        """Lowest (or sigma-nearest) eigenpairs on the reduced DOF set.

        Returns (energies ascending, eigenvectors on the full node grid).
        """
        cfg = self.config
        if k is None:
            k = cfg.eigenpair_count
        a = self.operator(cc_depth, field_strength)[np.ix_(self.free, self.free)]
        m = self.mass[np.ix_(self.free, self.free)]
        if sigma is None:
            sigma = self._default_sigma(cc_depth)
        v0 = np.ones(a.shape[0])
        try:
            vals, vecs = eigsh(a, k=k, M=m, sigma=sigma, which="LM", v0=v0)
        except Exception as exc:  # arpack failures surface as RuntimeError
            raise EigensolverFailure(str(exc)) from exc
        order = np.argsort(vals)
        vals = vals[order]
        vecs = vecs[:, order]
        full = np.zeros(((self.n_eta + 1) * (self.n_theta + 1), k))
        full[self.free, :] = vecs
        return vals, full

    def _default_sigma(self, cc_depth: float = None) -> float:
        cfg = self.config
        z = cfg.effective_charge
        sigma = -2.0 * z * z
        if self.cc_block is not None:
            depth = cfg.central_cell.depth if cc_depth is None else cc_depth
            sigma += -abs(depth)
        return sigma

    def surface_norm(self, y_full: np.ndarray) -> float:
        """Discrete integral of y^2 over the solved theta domain."""
        return float(y_full @ (self.mass @ y_full))


def _count_sign_changes(vals: np.ndarray, tol: float) -> int:
    live = vals[np.abs(vals) > tol]
    if live.size < 2:
        return 0
    return int(np.sum(np.sign(live[1:]) * np.sign(live[:-1]) < 0))


def _node_counts(y: np.ndarray) -> tuple:
    tol = 1e-6 * np.abs(y).max() if y.size else 0.0
    i_max, j_max = np.unravel_index(np.argmax(np.abs(y)), y.shape)
    return (_count_sign_changes(y[:, j_max], tol), _count_sign_changes(y[i_max, :], tol))


def _full_theta_norm(disc: _Discretization, y_full: np.ndarray) -> float:
    norm = disc.surface_norm(y_full)
    if disc.config.theta_parity != PARITY_FULL:
        norm *= 2.0
    return norm


def _make_state(disc: _Discretization, energy: float, y_full: np.ndarray) -> EnvelopeState:
    cfg = disc.config
    gamma = cfg.anisotropy_ratio
    norm = _full_theta_norm(disc, y_full)
    scale = 1.0 / math.sqrt(2.0 * math.pi * math.sqrt(gamma) * norm)
    y = (y_full * scale).reshape(disc.n_eta + 1, disc.n_theta + 1)
    # deterministic sign: make the first significant lobe positive
    flat = y.ravel()
    lead = flat[np.abs(flat) > 1e-9 * np.abs(flat).max()]
    if lead.size and lead[0] < 0:
        y = -y
    return EnvelopeState(
        energy=float(energy),
        y=y,
        m=cfg.magnetic_quantum_number,
        parity=cfg.theta_parity,
        scaling_radius=cfg.scaling_radius,
        anisotropy_ratio=gamma,
        node_counts=_node_counts(y),
        norm_check=norm,
    )


def assemble_and_solve(config: SolverConfig, check_convergence: bool = False,
                       convergence_rtol: float = 0.005) -> list:
    """Lowest eigenstates of the compressed 2D operator, energies ascending.

    With ``check_convergence`` the ground energy is compared against a
    half-resolution solve; more than ``convergence_rtol`` relative drift
    raises MeshTooCoarse.
    """
    disc = _Discretization(config)
    vals, vecs = disc.solve()
    if check_convergence:
        coarse_cfg = replace(config, mesh=(config.mesh[0] // 2, config.mesh[1] // 2))
        coarse_vals, _ = _Discretization(coarse_cfg).solve(k=1)
        if abs(coarse_vals[0] - vals[0]) > convergence_rtol * abs(vals[0]):
            raise MeshTooCoarse(
                f"ground energy moved {coarse_vals[0]:.6f} -> {vals[0]:.6f} "
                f"under refinement (> {convergence_rtol:.1%})")
    states = [_make_state(disc, vals[i], vecs[:, i]) for i in range(vals.size)]
    # stable ordering inside degenerate clusters
    states.sort(key=lambda s: (round(s.energy, 10), s.node_counts, s.parity))
    return states


def calibrate_central_cell(target_binding: float, r_c: float,
                           config: SolverConfig, rtol: float = 1e-3,
                           max_iter: int = 200) -> float:
    """Well depth reproducing the target binding energy (bisection).

    ``target_binding`` is positive (energy = -target_binding).  The
    uncorrected ground state must be shallower than the target; energy
    must respond monotonically while the bracket expands.
    """
    target_energy = -abs(target_binding)
    cfg = replace(config, central_cell=CentralCell(depth=0.0, radius=r_c))
    disc = _Discretization(cfg)

    def ground(depth):
        vals, _ = disc.solve(k=1, cc_depth=depth,
                             sigma=min(-2.0 * cfg.effective_charge**2 - abs(depth),
                                       1.5 * target_energy))
        return vals[0]

    e0 = ground(0.0)
    if target_energy > e0:
        raise BracketFailure(
            f"target energy {target_energy:.4f} is above the uncorrected "
            f"ground energy {e0:.4f}")
    if target_energy == e0:
        return 0.0

    lo_depth, lo_e = 0.0, e0
    hi_depth = -max(abs(target_energy), 1.0)
    prev_e = e0
    for _ in range(60):
        e = ground(hi_depth)
        if e > prev_e + 1e-12:
            raise BracketFailure("ground energy not monotone in the well depth")
        prev_e = e
        if e <= target_energy:
            break
        lo_depth, lo_e = hi_depth, e
        hi_depth *= 2.0
    else:
        raise BracketFailure("could not bracket the target binding energy")

    for _ in range(max_iter):
        mid = 0.5 * (lo_depth + hi_depth)
        e = ground(mid)
        if abs(e - target_energy) <= rtol * abs(target_energy):
            return mid
        if e > target_energy:
            lo_depth = mid
        else:
            hi_depth = mid
    raise BracketFailure("central-cell bisection did not converge")


def stark_energy_direct(config: SolverConfig, state_index: int = 0,
                        max_splits: int = 8) -> float:
    """Eigenvalue of the tracked state with the axial field included.

    The state is followed from zero field by mass-weighted overlap; if a
    direct step drops the overlap below 0.5 the field interval is split
    (avoided crossings with slab continuum states), up to ``max_splits``
    refinements.
    """
    if config.axial_field is None:
        raise ConfigError("stark_energy_direct needs an axial_field in the config")
    field = config.axial_field.strength
    disc = _Discretization(config)

    k = max(config.eigenpair_count, state_index + 3)
    vals, vecs = disc.solve(k=k, field_strength=0.0)
    energy = vals[state_index]
    y_ref = vecs[:, state_index]
    if field == 0.0:
        return float(energy)

    def advance(e_prev, y_prev, f_lo, f_hi, depth):
        vals, vecs = disc.solve(k=k, field_strength=f_hi, sigma=e_prev)
        m_y = disc.mass @ y_prev
        overlaps = np.abs(vecs.T @ m_y) / np.sqrt(
            np.maximum(1e-300, (vecs * (disc.mass @ vecs)).sum(axis=0))
            * disc.surface_norm(y_prev))
        best = int(np.argmax(overlaps))
        if overlaps[best] < 0.5:
            if depth >= max_splits:
                raise StateCrossing(
                    f"overlap {overlaps[best]:.3f} < 0.5 while stepping the field")
            mid = 0.5 * (f_lo + f_hi)
            e_mid, y_mid = advance(e_prev, y_prev, f_lo, mid, depth + 1)
            return advance(e_mid, y_mid, mid, f_hi, depth + 1)
        return vals[best], vecs[:, best]

    energy, _ = advance(energy, y_ref, 0.0, field, 0)
    return float(energy)


def evaluate_envelope(state: EnvelopeState, points: np.ndarray,
                      r0: float = None) -> np.ndarray:
    """Reconstruct F(r) = e^{i m phi} y(eta, theta) / r' at physical points.

    ``points`` is (..., 3) with the valley (longitudinal) axis along z;
    the result is 3D-normalized and complex.  Outside the mesh support
    the amplitude is zero.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    gamma = state.anisotropy_ratio
    r0 = state.scaling_radius if r0 is None else r0

    x, yy, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho = np.hypot(x, yy)
    zp = z / math.sqrt(gamma)
    rp = np.hypot(rho, zp)
    theta = np.arctan2(rho, zp)
    eta = np.arctan2(rp, r0)

    sign = np.ones_like(rp)
    if state.parity != PARITY_FULL:
        over = theta > math.pi / 2.0
        theta = np.where(over, math.pi - theta, theta)
        if state.parity == PARITY_ODD:
            sign = np.where(over, -1.0, 1.0)

    n_eta = state.y.shape[0] - 1
    n_theta = state.y.shape[1] - 1
    h_eta = (math.pi / 2.0) / n_eta
    h_theta = state.theta_max / n_theta
    fi = np.clip(eta / h_eta, 0.0, n_eta - 1e-9)
    fj = np.clip(theta / h_theta, 0.0, n_theta - 1e-9)
    i = fi.astype(int)
    j = fj.astype(int)
    u = fi - i
    v = fj - j
    ysurf = state.y
    y_val = ((1 - u) * (1 - v) * ysurf[i, j] + u * (1 - v) * ysurf[i + 1, j]
             + (1 - u) * v * ysurf[i, j + 1] + u * v * ysurf[i + 1, j + 1])

    amp = sign * y_val / np.maximum(rp, 1e-12)
    if state.m != 0:
        phi = np.arctan2(yy, x)
        amp = amp * np.exp(1j * state.m * phi)
    else:
        amp = amp.astype(complex)
    return amp[0] if scalar else amp


def surface_quadrature(state_a: EnvelopeState, state_b: EnvelopeState, kind: str) -> float:
    """Full-theta integral of y_a y_b g(r', theta) sin(theta) dr' dtheta.

    ``kind``: "overlap" (g = 1), "r_cos" (g = r' cos theta) or
    "r_sin" (g = r' sin theta).  Half-domain states are extended by
    their z-parity; incompatible parity makes the integral vanish.
    """
    if state_a.y.shape != state_b.y.shape or state_a.parity == PARITY_FULL \
            or state_b.parity == PARITY_FULL:
        return _surface_quadrature_general(state_a, state_b, kind)

    g_parity = {"overlap": +1, "r_sin": +1, "r_cos": -1}[kind]
    pa = +1 if state_a.parity == PARITY_EVEN else -1
    pb = +1 if state_b.parity == PARITY_EVEN else -1
    if pa * pb * g_parity < 0:
        return 0.0
    return 2.0 * _half_domain_integral(state_a, state_b, kind)


def _half_domain_integral(a: EnvelopeState, b: EnvelopeState, kind: str) -> float:
    n_eta = a.y.shape[0] - 1
    n_theta = a.y.shape[1] - 1
    r0 = a.scaling_radius
    h_eta = (math.pi / 2.0) / n_eta
    h_theta = a.theta_max / n_theta

    eta0 = np.repeat(np.arange(n_eta) * h_eta, n_theta)
    th0 = np.tile(np.arange(n_theta) * h_theta, n_eta)
    xi, zeta = np.meshgrid(_GAUSS_NODES, _GAUSS_NODES, indexing="ij")
    xi, zeta = xi.ravel(), zeta.ravel()
    wq = np.outer(_GAUSS_WEIGHTS, _GAUSS_WEIGHTS).ravel() * h_eta * h_theta

    eta = eta0[:, None] + xi[None, :] * h_eta
    theta = th0[:, None] + zeta[None, :] * h_theta
    shapes = np.stack([(1 - xi) * (1 - zeta), xi * (1 - zeta),
                       (1 - xi) * zeta, xi * zeta], axis=1)

    stride = n_theta + 1
    first = (np.repeat(np.arange(n_eta), n_theta) * stride
             + np.tile(np.arange(n_theta), n_eta))
    conn = np.stack([first, first + stride, first + 1, first + stride + 1], axis=1)

    ya = a.y.ravel()[conn] @ shapes.T
    yb = b.y.ravel()[conn] @ shapes.T

    rp = r0 * np.tan(eta)
    meas = (r0 / np.cos(eta)**2) * np.sin(theta)
    if kind == "overlap":
        g = 1.0
    elif kind == "r_cos":
        g = rp * np.cos(theta)
    elif kind == "r_sin":
        g = rp * np.sin(theta)
    else:
        raise ValueError(f"unknown quadrature kind {kind!r}")
    return float(np.sum((ya * yb * g * meas) * wq[None, :]))


def _surface_quadrature_general(a: EnvelopeState, b: EnvelopeState, kind: str) -> float:
    """Fallback for full-domain or mixed-resolution pairs: evaluate both
    surfaces on a shared fine (eta, theta) quadrature over [0, pi]."""
    n_eta = max(a.y.shape[0], b.y.shape[0]) - 1
    n_theta = 2 * (max(a.y.shape[1], b.y.shape[1]) - 1)
    r0 = a.scaling_radius
    if abs(r0 - b.scaling_radius) > 1e-12 or \
            abs(a.anisotropy_ratio - b.anisotropy_ratio) > 1e-12:
        raise ValueError("quadrature requires a shared solver frame")

    h_eta = (math.pi / 2.0) / n_eta
    h_theta = math.pi / n_theta
    eta = (np.arange(n_eta)[:, None] + _GAUSS_NODES[None, :]) * h_eta
    theta = (np.arange(n_theta)[:, None] + _GAUSS_NODES[None, :]) * h_theta
    eta_g, theta_g = np.meshgrid(eta.ravel(), theta.ravel(), indexing="ij")
    w_eta = np.tile(_GAUSS_WEIGHTS * h_eta, n_eta)
    w_theta = np.tile(_GAUSS_WEIGHTS * h_theta, n_theta)
    wq = np.outer(w_eta, w_theta)

    def sample(state):
        th = theta_g
        sign = np.ones_like(th)
        if state.parity != PARITY_FULL:
            over = th > math.pi / 2.0
            th = np.where(over, math.pi - th, th)
            if state.parity == PARITY_ODD:
                sign = np.where(over, -1.0, 1.0)
        ns_eta = state.y.shape[0] - 1
        ns_theta = state.y.shape[1] - 1
        fi = np.clip(eta_g / ((math.pi / 2.0) / ns_eta), 0, ns_eta - 1e-9)
        fj = np.clip(th / (state.theta_max / ns_theta), 0, ns_theta - 1e-9)
        i, j = fi.astype(int), fj.astype(int)
        u, v = fi - i, fj - j
        ys = state.y
        return sign * ((1 - u) * (1 - v) * ys[i, j] + u * (1 - v) * ys[i + 1, j]
                       + (1 - u) * v * ys[i, j + 1] + u * v * ys[i + 1, j + 1])

    rp = r0 * np.tan(eta_g)
    meas = (r0 / np.cos(eta_g)**2) * np.sin(theta_g)
    if kind == "overlap":
        g = 1.0
    elif kind == "r_cos":
        g = rp * np.cos(theta_g)
    elif kind == "r_sin":
        g = rp * np.sin(theta_g)
    else:
        raise ValueError(f"unknown quadrature kind {kind!r}")
    return float(np.sum(sample(a) * sample(b) * g * meas * wq))
