"""Pulse-parameter optimization: Bell fidelity vs (Omega, Delta/Omega, xi).

Everything here works in units of gamma_se = 1.  The interaction
strength enters as u / gamma_se; the resonant and off-resonant blockade
protocols expose only the Rabi frequency, the blockade-inspired gate
additionally frees the detuning ratio and the second-pulse phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import NoConvergence
from .lindblad import DEFAULT_TOL
from .protocols import (
    INSPIRED_DETUNING_RATIO,
    INSPIRED_RABI_OVER_U,
    INSPIRED_XI,
    LEVINE_DETUNING_RATIO,
    LEVINE_XI,
    ProtocolKind,
    PulseProtocol,
    PulseSegment,
    build_protocol,
    run_protocol,
)
from .units import DecoherenceRates

EVAL_BUDGET_PER_START = 2000
N_MULTISTARTS = 4

# Deterministic multistart seeds, expressed in the scale-free
# coordinates (Omega/u, Delta/Omega, xi)
_STARTS_3D = (
    (1.5, 0.29, 1.53),
    (0.7, 0.25, 1.2),
    (3.0, 0.35, 2.2),
    (0.4, 0.45, 3.5),
)
# Rabi-only starts as fractions of the log-bound interval
_STARTS_1D = (0.35, 0.55, 0.75, 0.9)


@dataclass(frozen=True)
class OptimizationSpec:
    protocol_kind: ProtocolKind
    interaction_over_gamma: float
    tolerance: float = 1e-5
    rabi_bounds: tuple = None      # (lo, hi) in gamma_se units
    detuning_ratio_bounds: tuple = (0.0, 1.0)
    xi_bounds: tuple = (0.0, 2.0 * math.pi)
    integrator_tol: float = DEFAULT_TOL

    def resolved_rabi_bounds(self) -> tuple:
        if self.rabi_bounds is not None:
            return self.rabi_bounds
        return (1.0, 10.0 * self.interaction_over_gamma)

    @property
    def frees_shape_parameters(self) -> bool:
        return self.protocol_kind is ProtocolKind.BLOCKADE_INSPIRED


@dataclass
class OptimumRecord:
    protocol_kind: ProtocolKind
    interaction_over_gamma: float
    rabi: float
    detuning: float
    xi: float
    fidelity: float
    evaluations: int = 0

    @property
    def detuning_ratio(self) -> float:
        return self.detuning / self.rabi

    @property
    def rabi_over_u(self) -> float:
        return self.rabi / self.interaction_over_gamma

    def protocol(self) -> PulseProtocol:
        if self.protocol_kind is ProtocolKind.RESONANT_BLOCKADE:
            return build_protocol(self.protocol_kind, self.rabi)
        return build_protocol(self.protocol_kind, self.rabi,
                              detuning_ratio=self.detuning_ratio, xi=self.xi)


def gate_fidelity(
    kind: ProtocolKind,
    rabi: float,
    u_over_gamma: float,
    detuning_ratio: float = None,
    xi: float = None,
    integrator_tol: float = DEFAULT_TOL,
) -> float:
    if rabi <= 0:
        return 0.0
    protocol = build_protocol(kind, rabi, detuning_ratio=detuning_ratio, xi=xi)
    rates = DecoherenceRates(gamma_se=1.0, gamma_de=0.5)
    result = run_protocol(protocol, u_over_gamma, rates, tol=integrator_tol)
    return result.fidelity


def optimize(spec: OptimizationSpec, rates: DecoherenceRates = None,
             starts: list = None) -> OptimumRecord:
    """Maximize Bell fidelity over the free pulse parameters.

    Derivative-free simplex search from deterministic multistarts; the
    best converged local maximum is returned.  ``rates`` defaults to
    (gamma_se, gamma_de) = (1, 0.5); other values rescale u/gamma only
    through gamma_se, so the default covers the contract.
    """
    if spec.interaction_over_gamma <= 0:
        raise ValueError("interaction_over_gamma must be positive")
    if rates is None:
        rates = DecoherenceRates(gamma_se=1.0, gamma_de=0.5)
    u = spec.interaction_over_gamma * rates.gamma_se
    lo, hi = spec.resolved_rabi_bounds()

    if spec.protocol_kind is ProtocolKind.RESONANT_BLOCKADE and starts is None:
        return _optimize_primary_branch(spec, rates, u, lo, hi)

    evaluations = [0]

    if spec.frees_shape_parameters:
        dlo, dhi = spec.detuning_ratio_bounds
        xlo, xhi = spec.xi_bounds

        def objective(x):
            evaluations[0] += 1
            rabi = x[0] * u
            if not (lo <= rabi <= hi and dlo <= x[1] <= dhi and xlo <= x[2] <= xhi):
                return 1.0 + _bound_excess(x, [(lo / u, hi / u), (dlo, dhi), (xlo, xhi)])
            protocol = build_protocol(spec.protocol_kind, rabi,
                                      detuning_ratio=x[1], xi=x[2])
            res = run_protocol(protocol, u, rates, tol=spec.integrator_tol)
            return 1.0 - res.fidelity

        start_points = starts if starts is not None else [
            (min(max(s[0], lo / u), hi / u), s[1], s[2]) for s in _STARTS_3D
        ]
        xatol = min(spec.tolerance, 1e-4)
    else:
        if spec.protocol_kind is ProtocolKind.OFF_RESONANT_BLOCKADE:
            fixed_ratio, fixed_xi = LEVINE_DETUNING_RATIO, LEVINE_XI
        else:
            fixed_ratio, fixed_xi = None, None

        def objective(x):
            evaluations[0] += 1
            rabi = math.exp(x[0])
            if not lo <= rabi <= hi:
                return 1.0 + abs(math.log(max(rabi, 1e-300)) - math.log(math.sqrt(lo * hi)))
            protocol = build_protocol(spec.protocol_kind, rabi,
                                      detuning_ratio=fixed_ratio, xi=fixed_xi)
            res = run_protocol(protocol, u, rates, tol=spec.integrator_tol)
            return 1.0 - res.fidelity

        llo, lhi = math.log(lo), math.log(hi)
        start_points = starts if starts is not None else [
            (llo + t * (lhi - llo),) for t in _STARTS_1D
        ]
        xatol = 1e-5

    best = None
    any_converged = False
    for s in start_points:
        res = minimize(
            objective, np.asarray(s, dtype=float), method="Nelder-Mead",
            options={
                "xatol": xatol, "fatol": 1e-11,
                "maxfev": EVAL_BUDGET_PER_START, "maxiter": EVAL_BUDGET_PER_START,
            },
        )
        any_converged = any_converged or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    if not any_converged:
        raise NoConvergence(
            f"no simplex start converged within {EVAL_BUDGET_PER_START} evaluations"
        )

    if spec.frees_shape_parameters:
        rabi = best.x[0] * u
        ratio, xi = float(best.x[1]), float(best.x[2])
    else:
        rabi = math.exp(best.x[0])
        if spec.protocol_kind is ProtocolKind.OFF_RESONANT_BLOCKADE:
            ratio, xi = LEVINE_DETUNING_RATIO, LEVINE_XI
        else:
            ratio, xi = 0.0, 0.0

    return OptimumRecord(
        protocol_kind=spec.protocol_kind,
        interaction_over_gamma=spec.interaction_over_gamma,
        rabi=float(rabi / rates.gamma_se),
        detuning=float(ratio * rabi / rates.gamma_se),
        xi=float(xi),
        fidelity=float(1.0 - best.fun),
        evaluations=evaluations[0],
    )


def _optimize_primary_branch(spec: OptimizationSpec, rates: DecoherenceRates,
                             u: float, lo: float, hi: float,
                             scan_points: int = 48) -> OptimumRecord:
    """Resonant-blockade optimum on the primary (lowest-Rabi) branch.

    Rabi-cycle aliasing grows narrow secondary maxima at small u/Omega
    where the blockade premise no longer holds; the comparison curves
    follow the envelope branch.  A deterministic log-grid scan locates
    the smallest-Rabi competitive local maximum, then a bounded simplex
    refines it.
    """
    grid = np.geomspace(lo, hi, scan_points)
    evaluations = [0]

    def fidelity(rabi):
        evaluations[0] += 1
        protocol = build_protocol(spec.protocol_kind, rabi)
        res = run_protocol(protocol, u, rates, tol=spec.integrator_tol)
        return res.fidelity

    vals = np.array([fidelity(r) for r in grid])
    peaks = [i for i in range(1, scan_points - 1)
             if vals[i] >= vals[i - 1] and vals[i] > vals[i + 1]]
    if not peaks:
        peaks = [int(np.argmax(vals))]
    best_inf = min(1.0 - vals[i] for i in peaks)
    k = next(i for i in peaks if (1.0 - vals[i]) <= 3.0 * best_inf)

    w_lo = math.log(grid[max(k - 1, 0)])
    w_hi = math.log(grid[min(k + 1, scan_points - 1)])

    def objective(x):
        w = float(np.clip(x[0], w_lo, w_hi))
        return 1.0 - fidelity(math.exp(w))

    res = minimize(objective, np.array([math.log(grid[k])]), method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-11,
                            "maxfev": EVAL_BUDGET_PER_START})
    rabi = math.exp(float(np.clip(res.x[0], w_lo, w_hi)))
    return OptimumRecord(
        protocol_kind=spec.protocol_kind,
        interaction_over_gamma=spec.interaction_over_gamma,
        rabi=rabi / rates.gamma_se, detuning=0.0, xi=0.0,
        fidelity=float(1.0 - res.fun), evaluations=evaluations[0],
    )


def _bound_excess(x, bounds):
    excess = 0.0
    for v, (lo, hi) in zip(x, bounds):
        if v < lo:
            excess += lo - v
        elif v > hi:
            excess += v - hi
    return excess


def optimal_curve(protocol_kind: ProtocolKind, u_over_gamma_grid,
                  tolerance: float = 1e-5,
                  integrator_tol: float = DEFAULT_TOL) -> list:
    """Per-grid-point optima, warm-starting each point from the previous
    to stay on one solution branch of the aliased fidelity landscape."""
    grid = list(u_over_gamma_grid)
    if any(u <= 0 for u in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("u/gamma grid must be positive and ascending")

    records = []
    prev = None
    for u in grid:
        spec = OptimizationSpec(protocol_kind, u, tolerance=tolerance,
                                integrator_tol=integrator_tol)
        starts = None
        if prev is not None and protocol_kind is not ProtocolKind.RESONANT_BLOCKADE:
            if spec.frees_shape_parameters:
                starts = [
                    (prev.rabi_over_u * prev.interaction_over_gamma / u,
                     prev.detuning_ratio, prev.xi),
                    (prev.rabi_over_u, prev.detuning_ratio, prev.xi),
                ]
            else:
                lo, hi = spec.resolved_rabi_bounds()
                w = math.log(min(max(prev.rabi, lo), hi))
                starts = [(w,), (w + 0.5,)]
        records.append(optimize(spec, starts=starts))
        prev = records[-1]
    return records


def robustness_scan_rabi(u_over_gamma: float, rabi_multipliers,
                         optimum: OptimumRecord = None,
                         integrator_tol: float = DEFAULT_TOL) -> list:
    """Blockade-inspired fidelity with the applied Rabi frequency scaled
    off its design value; pulse durations, detuning and xi stay at the
    optimum (the pulse is timed for the nominal Omega)."""
    if any(m <= 0 for m in rabi_multipliers):
        raise ValueError("rabi multipliers must be positive")
    if optimum is None:
        optimum = optimize(OptimizationSpec(
            ProtocolKind.BLOCKADE_INSPIRED, u_over_gamma,
            integrator_tol=integrator_tol))
    nominal = optimum.protocol()
    rates = DecoherenceRates(gamma_se=1.0, gamma_de=0.5)

    out = []
    for mult in rabi_multipliers:
        segs = tuple(
            PulseSegment(seg.rabi_magnitude * mult, seg.phase, seg.detuning,
                         seg.duration, seg.addressing)
            for seg in nominal.segments
        )
        perturbed = PulseProtocol(nominal.kind, segs)
        res = run_protocol(perturbed, u_over_gamma, rates, tol=integrator_tol)
        out.append((float(mult), res.fidelity))
    return out


def robustness_scan_detuning(u_over_gamma: float, detuning_offsets,
                             optimum: OptimumRecord = None,
                             integrator_tol: float = DEFAULT_TOL) -> list:
    """Blockade-inspired infidelity with the transition energy shifted by
    offset * Omega (inhomogeneous broadening enters as a common detuning
    error); all pulse parameters stay at the optimum."""
    if not all(np.isfinite(detuning_offsets)):
        raise ValueError("detuning offsets must be finite")
    if optimum is None:
        optimum = optimize(OptimizationSpec(
            ProtocolKind.BLOCKADE_INSPIRED, u_over_gamma,
            integrator_tol=integrator_tol))
    nominal = optimum.protocol()
    rates = DecoherenceRates(gamma_se=1.0, gamma_de=0.5)

    out = []
    for off in detuning_offsets:
        res = run_protocol(nominal, u_over_gamma, rates, tol=integrator_tol,
                           detuning_offset=float(off) * optimum.rabi)
        out.append((float(off), 1.0 - res.fidelity))
    return out


def certify_local_maximum(record: OptimumRecord, rel_step: float = 0.05,
                          integrator_tol: float = DEFAULT_TOL,
                          slack: float = 1e-9) -> bool:
    """Check that scaling the optimal Rabi frequency by (1 +/- rel_step)
    does not improve the fidelity."""
    for mult in (1.0 - rel_step, 1.0 + rel_step):
        f = gate_fidelity(
            record.protocol_kind, record.rabi * mult,
            record.interaction_over_gamma,
            detuning_ratio=(record.detuning_ratio if record.detuning else None),
            xi=(record.xi if record.detuning else None),
            integrator_tol=integrator_tol,
        )
        if f > record.fidelity + slack:
            return False
    return True
