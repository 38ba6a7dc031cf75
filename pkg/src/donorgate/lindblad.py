"""Two-donor density-matrix evolution under the driven Lindblad equation.

Each donor is a three-level system {|0>, |1>, |r>}; the pair lives in a
9x9 density matrix indexed 3*i + j.  Internally hbar = 1 and all rates
are measured in units of the spontaneous-emission rate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure, InvalidState
from .units import DecoherenceRates

DIM = 3          # single-donor levels |0>, |1>, |r>
PAIR_DIM = 9

IDX_00 = 0
IDX_11 = 4
IDX_RR = 8

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-9

DEFAULT_TOL = 1e-10


def _ket(i: int) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[i] = 1.0
    return v

KET_0, KET_1, KET_R = _ket(0), _ket(1), _ket(2)

BELL_PHI_PLUS = np.zeros(PAIR_DIM, dtype=complex)
BELL_PHI_PLUS[IDX_00] = BELL_PHI_PLUS[IDX_11] = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class DriveParameters:
    """Piecewise-constant drive: per-donor complex Rabi, common detuning,
    pair interaction shift on |rr>."""

    rabi_1: complex = 0.0
    rabi_2: complex = 0.0
    detuning: float = 0.0
    interaction: float = 0.0


@dataclass(frozen=True)
class JumpOperatorSet:
    """The four decoherence channels: per-donor dephasing between |1> and
    |r| and per-donor spontaneous emission |r> -> |1>."""

    operators: tuple = field(default_factory=tuple)

    @classmethod
    def from_rates(cls, rates: DecoherenceRates) -> "JumpOperatorSet":
        deph = np.zeros((DIM, DIM), dtype=complex)
        deph[2, 2] = 1.0
        deph[1, 1] = -1.0
        emit = np.zeros((DIM, DIM), dtype=complex)
        emit[1, 2] = 1.0
        eye = np.eye(DIM, dtype=complex)

        ops = []
        if rates.gamma_de != 0.0:
            ops.append(np.sqrt(rates.gamma_de) * np.kron(deph, eye))
            ops.append(np.sqrt(rates.gamma_de) * np.kron(eye, deph))
        if rates.gamma_se != 0.0:
            ops.append(np.sqrt(rates.gamma_se) * np.kron(emit, eye))
            ops.append(np.sqrt(rates.gamma_se) * np.kron(eye, emit))
        return cls(operators=tuple(ops))

    @classmethod
    def none(cls) -> "JumpOperatorSet":
        return cls(operators=())


def build_hamiltonian(p: DriveParameters) -> np.ndarray:
    """H = sum_i (Omega_i/2 |1>_i<r| + h.c. - Delta |r>_i<r|) + u |rr><rr|."""
    h1 = np.zeros((DIM, DIM), dtype=complex)
    h1[1, 2] = 0.5 * p.rabi_1
    h1[2, 1] = 0.5 * np.conj(p.rabi_1)
    h1[2, 2] = -p.detuning

    h2 = np.zeros((DIM, DIM), dtype=complex)
    h2[1, 2] = 0.5 * p.rabi_2
    h2[2, 1] = 0.5 * np.conj(p.rabi_2)
    h2[2, 2] = -p.detuning

    eye = np.eye(DIM, dtype=complex)
    h = np.kron(h1, eye) + np.kron(eye, h2)
    h[IDX_RR, IDX_RR] += p.interaction
    return h


def validate_density_matrix(rho: np.ndarray, context: str = "") -> None:
    """Raise InvalidState if rho breaks hermiticity / trace / positivity."""
    if rho.shape != (PAIR_DIM, PAIR_DIM):
        raise InvalidState(f"density matrix must be 9x9, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > 100 * HERMITICITY_TOL:
        raise InvalidState(f"hermiticity violation {herm:.2e} {context}")
    tr = abs(rho.trace() - 1.0)
    if tr > 100 * TRACE_TOL:
        raise InvalidState(f"trace deviation {tr:.2e} {context}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lo < 100 * POSITIVITY_TOL:
        raise InvalidState(f"negative eigenvalue {lo:.2e} {context}")


def pure_state(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return np.outer(ket, ket.conj())


def product_ket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def evolve(
    rho0: np.ndarray,
    p: DriveParameters,
    jumps: JumpOperatorSet,
    duration: float,
    tol: float = DEFAULT_TOL,
    sample_times: np.ndarray | None = None,
):
    """Propagate rho0 for the given duration.

    Integrates d(rho)/dt = -i (H_eff rho - rho H_eff^dag) + sum_j L_j rho L_j^dag
    with H_eff = H - (i/2) sum_j L_j^dag L_j, using adaptive embedded
    Runge-Kutta with local error control at ``tol``.  The right-hand side
    is trace-free and hermiticity-preserving by construction, so those
    invariants survive to roundoff regardless of step size.

    Returns the final density matrix, or (final, samples) when
    ``sample_times`` is given (samples has shape (len(t), 9, 9)).
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    validate_density_matrix(rho0, "(initial state)")
    if duration == 0.0:
        if sample_times is not None:
            return rho0.copy(), np.broadcast_to(rho0, (len(sample_times), PAIR_DIM, PAIR_DIM)).copy()
        return rho0.copy()

    h = build_hamiltonian(p)
    ops = [np.asarray(L, dtype=complex) for L in jumps.operators]
    h_eff = h - 0.5j * sum((L.conj().T @ L for L in ops), np.zeros_like(h))

    def rhs(_t, y):
        rho = y.reshape(PAIR_DIM, PAIR_DIM)
        drho = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
        for L in ops:
            drho += L @ rho @ L.conj().T
        return drho.ravel()

    t_eval = None
    if sample_times is not None:
        t_eval = np.asarray(sample_times, dtype=float)

    sol = solve_ivp(
        rhs,
        (0.0, duration),
        rho0.ravel().astype(complex),
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        raise IntegrationFailure(sol.message)

    rho = sol.y[:, -1].reshape(PAIR_DIM, PAIR_DIM)
    if sample_times is not None:
        samples = sol.y.T.reshape(-1, PAIR_DIM, PAIR_DIM)
        return rho, samples
    return rho


def bell_fidelity(rho: np.ndarray) -> float:
    """<Phi+| rho |Phi+> with |Phi+> = (|00> + |11>)/sqrt(2)."""
    val = BELL_PHI_PLUS.conj() @ rho @ BELL_PHI_PLUS
    return float(val.real)


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def populations(rho: np.ndarray) -> np.ndarray:
    """The 9 basis populations in index order 3*i + j."""
    return np.real(np.diag(rho)).copy()
