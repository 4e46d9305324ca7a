"""Integration of the non-Hermitian dynamics and its oracles.

Ket and dual (adjoint-Hamiltonian) Schroedinger evolution, mixed states as
fixed-weight ensembles of pure components, and a full Lindblad
superoperator integrator.  Norms and traces are never renormalized during
evolution; they are observables.

Number-conserving quadratic Hamiltonians are block diagonal over total
occupation sectors, so pure-state evolution runs sector by sector (a
five-quantum two-mode transfer is a 6-dimensional problem).  The dense
full-space path is kept as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .fock_space import FockSpace, QuantumState, make_space, mode_operator
from .ancillary_frames import frame_matrix
from .pulse_synthesis import ControlSchedule, global_phase, synthesize_pulses

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "LindbladParams",
    "PassageCheck",
    "evolve_ket",
    "evolve_dual",
    "evolve_density",
    "evolve_lindblad",
    "first_moment_check",
    "passage_check",
    "passage_state",
]

# Density snapshots above this dimension are only kept at the endpoints;
# observables are still sampled everywhere.
_DENSITY_STORE_LIMIT = 512


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive embedded Runge-Kutta settings and output sampling."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = math.inf
    method: str = "DOP853"
    num_samples: int = 401
    use_sectors: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.num_samples < 2:
            raise ValueError("need at least two sample times")

    def sample_times(self, tau: float) -> np.ndarray:
        return np.linspace(0.0, tau, self.num_samples)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed record of an evolution run.

    states may contain None (density runs above the snapshot limit keep
    only the endpoints); observables always carry one entry per time.
    """

    times: np.ndarray
    states: list
    observables: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, series in self.observables.items():
            if len(series) != len(self.times):
                raise ValueError(f"observable {name!r} length mismatch")

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]

    def state_at(self, index: int) -> QuantumState:
        st = self.states[index]
        if st is None:
            raise ValueError("state snapshot was not stored at this sample")
        return st


def _sector_blocks(space: FockSpace, totals: Sequence[int]):
    """Per-sector basis indices and a_j†a_k blocks for a 2-mode space."""
    blocks = {}
    for n in totals:
        idx = space.sector_indices(n)
        occs = [space.occupation_of(i) for i in idx]
        pos = {occ: p for p, occ in enumerate(occs)}
        d = len(idx)
        ks = np.zeros((space.num_modes, space.num_modes, d, d), dtype=complex)
        for p, occ in enumerate(occs):
            for j in range(space.num_modes):
                for k in range(space.num_modes):
                    if j == k:
                        ks[j, k, p, p] = occ[j]
                        continue
                    if occ[k] == 0 or occ[j] + 1 > space.cutoffs[j]:
                        continue
                    target = list(occ)
                    target[k] -= 1
                    target[j] += 1
                    q = pos.get(tuple(target))
                    if q is not None:
                        amp = math.sqrt((occ[j] + 1) * occ[k])
                        ks[j, k, q, p] = amp
        blocks[n] = (idx, ks)
    return blocks


def _integrate_linear(rhs_matrix: Callable[[float], np.ndarray], y0: np.ndarray,
                      samples: np.ndarray, cfg: IntegratorConfig):
    """i dy/dt = H(t) y integrated over the sample span; returns (Y, report)."""

    def rhs(t, y):
        return (-1j * rhs_matrix(t) @ y.view(complex)).view(float)

    sol = solve_ivp(rhs, (samples[0], samples[-1]), y0.astype(complex).view(float).copy(),
                    t_eval=samples, method=cfg.method, rtol=cfg.rel_tol,
                    atol=cfg.abs_tol, max_step=cfg.max_step)
    if not sol.success:
        raise RuntimeError(f"integrator failed: {sol.message}")
    out = sol.y.T.copy().view(complex)
    report = {"nfev": int(sol.nfev), "status": int(sol.status)}
    return out, report


def _coefficients(schedule: ControlSchedule, dual: bool) -> Callable[[float], np.ndarray]:
    if dual:
        return lambda t: synthesize_pulses(schedule, t).Ha.conj().T
    return lambda t: synthesize_pulses(schedule, t).Ha


def _evolve_pure(schedule: ControlSchedule, psi0: QuantumState, cfg: IntegratorConfig,
                 dual: bool) -> tuple[np.ndarray, np.ndarray, dict]:
    space = psi0.space
    samples = cfg.sample_times(schedule.tau)
    coeff = _coefficients(schedule, dual)
    reports = {}

    if cfg.use_sectors and space.num_modes == 2:
        occ_totals = np.array([sum(o) for o in space.occupations()])
        amp = psi0.data
        active = sorted({int(occ_totals[i]) for i in np.nonzero(np.abs(amp) > 0)[0]})
        blocks = _sector_blocks(space, active)
        out = np.zeros((len(samples), space.dim), dtype=complex)
        for n in active:
            idx, ks = blocks[n]
            y0 = amp[idx]

            def block_matrix(t, ks=ks):
                ha = coeff(t)
                return np.tensordot(ha, ks, axes=2)

            ys, rep = _integrate_linear(block_matrix, y0, samples, cfg)
            out[:, idx] = ys
            reports[f"sector_{n}"] = rep
        return samples, out, reports

    # full-space fallback, valid for any mode count
    ann = [mode_operator(space, k, "annihilation").matrix for k in range(space.num_modes)]
    quad = np.array([[ann[j].conj().T @ ann[k] for k in range(space.num_modes)]
                     for j in range(space.num_modes)])

    def full_matrix(t):
        ha = coeff(t)
        return np.tensordot(ha, quad, axes=2)

    ys, rep = _integrate_linear(full_matrix, psi0.data, samples, cfg)
    reports["full"] = rep
    return samples, ys, reports


def _pure_observables(space: FockSpace, samples: np.ndarray, ys: np.ndarray,
                      targets: dict[str, QuantumState] | None) -> dict:
    norms2 = np.einsum("ti,ti->t", ys.conj(), ys).real
    occ_totals = np.array([sum(o) for o in space.occupations()], dtype=float)
    number = np.einsum("ti,i,ti->t", ys.conj(), occ_totals, ys).real
    obs = {"norm2": norms2,
           "number_mean": number / np.where(norms2 > 0, norms2, 1.0)}
    if targets:
        for name, tgt in targets.items():
            if tgt.kind != "pure":
                raise ValueError("fidelity targets must be pure states")
            obs[name] = np.abs(ys @ tgt.data.conj()) ** 2
    return obs


def evolve_ket(schedule: ControlSchedule, psi0: QuantumState, cfg: IntegratorConfig,
               targets: dict[str, QuantumState] | None = None) -> Trajectory:
    """Integrate i d|psi>/dt = H(t)|psi> without renormalization.

    targets adds fidelity series |<target|psi(t)>|^2 to the observables.
    """
    if psi0.kind != "pure":
        raise ValueError("evolve_ket needs a pure state; use evolve_density")
    samples, ys, reports = _evolve_pure(schedule, psi0, cfg, dual=False)
    obs = _pure_observables(psi0.space, samples, ys, targets)
    states = [QuantumState(psi0.space, "pure", ys[i], norm_tracked=float(obs["norm2"][i]))
              for i in range(len(samples))]
    return Trajectory(samples, states, obs,
                      {"integrator": reports, "evolution": "ket"})


def evolve_dual(schedule: ControlSchedule, phi0: QuantumState, cfg: IntegratorConfig,
                targets: dict[str, QuantumState] | None = None) -> Trajectory:
    """Integrate the adjoint-space equation i d|phi>/dt = H†(t)|phi>."""
    if phi0.kind != "pure":
        raise ValueError("evolve_dual needs a pure state")
    samples, ys, reports = _evolve_pure(schedule, phi0, cfg, dual=True)
    obs = _pure_observables(phi0.space, samples, ys, targets)
    states = [QuantumState(phi0.space, "pure", ys[i], norm_tracked=float(obs["norm2"][i]))
              for i in range(len(samples))]
    return Trajectory(samples, states, obs,
                      {"integrator": reports, "evolution": "dual"})


def _decompose_density(rho: np.ndarray, tol: float = 1e-12):
    """Fixed-weight pure components of a density matrix.

    Diagonal matrices decompose onto basis vectors directly; anything else
    goes through an eigendecomposition.
    """
    off = rho - np.diag(np.diag(rho))
    if np.max(np.abs(off)) < tol:
        w = np.diag(rho).real
        keep = np.nonzero(w > tol)[0]
        vecs = []
        for i in keep:
            v = np.zeros(rho.shape[0], dtype=complex)
            v[i] = 1.0
            vecs.append(v)
        return w[keep], vecs
    w, v = np.linalg.eigh(rho)
    keep = np.nonzero(w > tol)[0]
    return w[keep].real, [v[:, i].copy() for i in keep]


def evolve_density(schedule: ControlSchedule, rho0: QuantumState, cfg: IntegratorConfig,
                   targets: dict[str, QuantumState] | None = None) -> Trajectory:
    """Evolve a density matrix as an ensemble of pure components.

    Equivalent to d rho/dt = -i (H rho - rho H†) with the trace kept as an
    observable.  Snapshots are stored at every sample for small spaces and
    only at the endpoints above the store limit; the final components are
    kept in metadata for low-rank post-processing.
    """
    if rho0.kind != "density":
        raise ValueError("evolve_density needs a density state")
    space = rho0.space
    weights, comps = _decompose_density(rho0.data)
    samples = cfg.sample_times(schedule.tau)
    comp_traj = []
    for v in comps:
        _, ys, _ = _evolve_pure(schedule,
                                QuantumState(space, "pure", v), cfg, dual=False)
        comp_traj.append(ys)

    trace = np.zeros(len(samples))
    for w, ys in zip(weights, comp_traj):
        trace += w * np.einsum("ti,ti->t", ys.conj(), ys).real
    obs = {"trace": trace}
    if targets:
        for name, tgt in targets.items():
            series = np.zeros(len(samples))
            for w, ys in zip(weights, comp_traj):
                series += w * np.abs(ys @ tgt.data.conj()) ** 2
            obs[name] = series

    store_all = space.dim <= _DENSITY_STORE_LIMIT
    states: list = []
    for i in range(len(samples)):
        if store_all or i in (0, len(samples) - 1):
            rho = np.zeros((space.dim, space.dim), dtype=complex)
            for w, ys in zip(weights, comp_traj):
                rho += w * np.outer(ys[i], ys[i].conj())
            states.append(QuantumState(space, "density", rho,
                                       norm_tracked=float(trace[i])))
        else:
            states.append(None)
    final_components = (np.asarray(weights),
                        np.stack([ys[-1] for ys in comp_traj], axis=1))
    return Trajectory(samples, states, obs,
                      {"evolution": "density", "final_components": final_components})


@dataclass(frozen=True)
class LindbladParams:
    """Open two-mode system: one cooperative and two local damping channels.

    The cooperative channel acts through c = u a + e^{i Theta} v b with
    damping eta; beta and chi damp the modes individually.  Dissipators use
    the amplitude-rate normalization L[o] rho = 2 o rho o† - {o†o, rho}, so
    the derived single-mode rates enter the coefficient matrix without
    factors of two: Gamma = eta u v, gamma_a = eta u^2 + beta,
    gamma_b = eta v^2 + chi.
    """

    eta: float
    beta: float
    chi: float
    u: float
    v: float
    Theta: float = 0.0
    omega_a: float = 0.0
    omega_b: float = 0.0
    J: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if min(self.eta, self.beta, self.chi) < 0:
            raise ValueError("damping rates must be >= 0")
        if min(abs(self.Theta), abs(self.Theta - math.pi)) > 1e-9:
            raise ValueError("Theta must be 0 or pi")

    @property
    def gamma_a(self) -> float:
        return self.eta * self.u ** 2 + self.beta

    @property
    def gamma_b(self) -> float:
        return self.eta * self.v ** 2 + self.chi

    @property
    def dissipative_coupling(self) -> float:
        return self.eta * self.u * self.v


def _lindblad_superoperator(space: FockSpace, p: LindbladParams) -> np.ndarray:
    a = mode_operator(space, 0, "annihilation").matrix
    b = mode_operator(space, 1, "annihilation").matrix
    h = (p.omega_a * a.conj().T @ a + p.omega_b * b.conj().T @ b
         + p.J * np.exp(1j * p.phi) * a.conj().T @ b
         + p.J * np.exp(-1j * p.phi) * b.conj().T @ a)
    eye = np.eye(space.dim)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    c = p.u * a + np.exp(1j * p.Theta) * p.v * b
    for rate, op in ((p.eta, c), (p.beta, a), (p.chi, b)):
        if rate == 0:
            continue
        opd = op.conj().T
        opdop = opd @ op
        sup += rate * (2.0 * np.kron(op, op.conj())
                       - np.kron(opdop, eye) - np.kron(eye, opdop.T))
    return sup


def evolve_lindblad(p: LindbladParams, rho0: QuantumState, cfg: IntegratorConfig,
                    t_final: float = 1.0) -> Trajectory:
    """Full superoperator integration of the three-dissipator master equation."""
    if rho0.kind != "density":
        raise ValueError("evolve_lindblad needs a density state")
    space = rho0.space
    sup = _lindblad_superoperator(space, p)
    samples = cfg.sample_times(t_final)

    def rhs(t, y):
        return (sup @ y.view(complex)).view(float)

    sol = solve_ivp(rhs, (samples[0], samples[-1]),
                    rho0.data.reshape(-1).astype(complex).view(float).copy(),
                    t_eval=samples, method=cfg.method, rtol=cfg.rel_tol,
                    atol=cfg.abs_tol, max_step=cfg.max_step)
    if not sol.success:
        raise RuntimeError(f"integrator failed: {sol.message}")
    rhos = sol.y.T.copy().view(complex).reshape(len(samples), space.dim, space.dim)
    trace = np.einsum("tii->t", rhos).real
    purity = np.einsum("tij,tji->t", rhos, rhos).real
    states = [QuantumState(space, "density", rhos[i], norm_tracked=float(trace[i]))
              for i in range(len(samples))]
    return Trajectory(samples, states, {"trace": trace, "purity": purity},
                      {"evolution": "lindblad", "nfev": int(sol.nfev)})


def first_moment_check(p: LindbladParams, rho0: QuantumState, cfg: IntegratorConfig,
                       t_final: float = 1.0) -> float:
    """Max relative deviation between Lindblad first moments and the closed
    2x2 linear mode system they must satisfy.

    The linear system couples <a>, <b> through the derived rates
    (gamma_a, gamma_b, Gamma); agreement validates that the non-Hermitian
    coefficient matrix reproduces the open dynamics at first-moment level.
    The residual is relative to the largest moment magnitude on the grid.
    """
    space = rho0.space
    traj = evolve_lindblad(p, rho0, cfg, t_final=t_final)
    a = mode_operator(space, 0, "annihilation").matrix
    b = mode_operator(space, 1, "annihilation").matrix
    moments = np.array([[np.trace(a @ st.data), np.trace(b @ st.data)]
                        for st in traj.states])

    coupling = p.dissipative_coupling
    m = np.array([
        [-1j * p.omega_a - p.gamma_a,
         -(1j * p.J * np.exp(1j * p.phi) + np.exp(1j * p.Theta) * coupling)],
        [-(1j * p.J * np.exp(-1j * p.phi) + np.exp(-1j * p.Theta) * coupling),
         -1j * p.omega_b - p.gamma_b],
    ])

    def rhs(t, y):
        return (m @ y.view(complex)).view(float)

    sol = solve_ivp(rhs, (traj.times[0], traj.times[-1]),
                    moments[0].astype(complex).view(float).copy(),
                    t_eval=traj.times, method=cfg.method,
                    rtol=min(cfg.rel_tol, 1e-12), atol=min(cfg.abs_tol, 1e-12))
    predicted = sol.y.T.copy().view(complex)
    scale = max(np.max(np.abs(predicted)), 1e-30)
    return float(np.max(np.abs(moments - predicted)) / scale)


def passage_state(schedule: ControlSchedule, n: int, t: float, space: FockSpace,
                  passage: str = "ket") -> QuantumState:
    """Normalized frame state mu†(t)^n / sqrt(n!) |vac> on the given space.

    ket uses the first ancillary mode, dual the last one.
    """
    md = frame_matrix(schedule.frame_params(), t).m_dagger
    row = 0 if passage == "ket" else md.shape[0] - 1
    creator = np.zeros((space.dim, space.dim), dtype=complex)
    for j in range(space.num_modes):
        creator += np.conj(md[row, j]) * mode_operator(space, j, "creation").matrix
    vec = space.basis_vector([0] * space.num_modes)
    for _ in range(n):
        vec = creator @ vec
    vec = vec / math.sqrt(math.factorial(n))
    return QuantumState(space, "pure", vec)


@dataclass(frozen=True)
class PassageCheck:
    overlap_deficit: float
    norm_ratio_error: float


def passage_check(schedule: ControlSchedule, n: int, cfg: IntegratorConfig,
                  passage: str = "ket") -> PassageCheck:
    """Certify the transitionless passage for an n-quantum payload.

    Evolves mu†(0)^n/sqrt(n!)|vac> (ket: first ancillary mode under H;
    dual: last ancillary mode under H†) and reports
    1 - min_t |overlap with the moving frame state| together with the worst
    deviation of |psi(t)| from exp(n X_signed(t)).
    """
    cut = max(n, 1)
    space = make_space(2, [cut, cut])
    psi0 = passage_state(schedule, n, 0.0, space, passage)
    evolve = evolve_ket if passage == "ket" else evolve_dual
    traj = evolve(schedule, psi0, cfg)
    record = global_phase(schedule, traj.times, passage=passage)

    worst_overlap = 0.0
    worst_norm = 0.0
    for i, t in enumerate(traj.times):
        frame = passage_state(schedule, n, float(t), space, passage)
        psi = traj.states[i].data
        norm = np.linalg.norm(psi)
        overlap = abs(np.vdot(frame.data, psi)) / norm
        worst_overlap = max(worst_overlap, 1.0 - overlap)
        predicted = math.exp(n * record.X_signed[i])
        worst_norm = max(worst_norm, abs(norm / predicted - 1.0))
    return PassageCheck(overlap_deficit=worst_overlap, norm_ratio_error=worst_norm)
