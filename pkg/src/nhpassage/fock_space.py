"""Truncated multimode bosonic Hilbert space.

Basis indexing, ladder operators, quadratic Hamiltonians, state factories
(Fock / coherent / cat / binomial-code / thermal) and fidelities.  Every
state factory renormalizes after truncation and reports the discarded
tail mass, so downstream fidelity numbers stay interpretable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, gammaincc

__all__ = [
    "FockSpace",
    "ModeOperator",
    "QuantumState",
    "TruncationError",
    "make_space",
    "mode_operator",
    "build_hamiltonian",
    "total_number_operator",
    "fock_state",
    "coherent_state",
    "cat_state",
    "binomial_code_state",
    "thermal_state",
    "fidelity",
    "state_fidelity",
]

# Largest Hilbert-space dimension make_space accepts by default.  Keeps an
# accidental (2, [600, 600]) from eating the machine; raise explicitly for
# bigger runs.
DEFAULT_MAX_DIM = 200_000


class TruncationError(ValueError):
    """Requested state leaves more tail mass outside the cutoff than allowed."""


@dataclass(frozen=True, eq=False)
class FockSpace:
    """Truncated product Fock space with per-mode occupation cutoffs.

    The basis index of an occupation tuple (n_1, ..., n_N) is
    sum_k n_k * stride_k with row-major strides, so index 0 is the vacuum
    and the last mode varies fastest.
    """

    num_modes: int
    cutoffs: tuple[int, ...]
    dim: int = field(init=False)
    _strides: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        dims = [c + 1 for c in self.cutoffs]
        strides = [1] * self.num_modes
        for k in range(self.num_modes - 2, -1, -1):
            strides[k] = strides[k + 1] * dims[k + 1]
        object.__setattr__(self, "dim", int(np.prod(dims)))
        object.__setattr__(self, "_strides", tuple(strides))

    def index_of(self, occupation: Sequence[int]) -> int:
        if len(occupation) != self.num_modes:
            raise ValueError(f"expected {self.num_modes} occupation numbers")
        for n, c in zip(occupation, self.cutoffs):
            if not 0 <= n <= c:
                raise ValueError(f"occupation {tuple(occupation)} outside cutoffs {self.cutoffs}")
        return int(sum(n * s for n, s in zip(occupation, self._strides)))

    def occupation_of(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise ValueError(f"basis index {index} outside [0, {self.dim})")
        occ = []
        for s in self._strides:
            occ.append(index // s)
            index %= s
        return tuple(occ)

    def occupations(self) -> Iterable[tuple[int, ...]]:
        """All basis occupation tuples in index order."""
        return (self.occupation_of(i) for i in range(self.dim))

    def sector_indices(self, total: int) -> np.ndarray:
        """Basis indices with fixed total occupation (quadratic a†a blocks)."""
        idx = [i for i, occ in enumerate(self.occupations()) if sum(occ) == total]
        return np.asarray(idx, dtype=int)

    def basis_vector(self, occupation: Sequence[int]) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index_of(occupation)] = 1.0
        return v


def make_space(num_modes: int, cutoffs: Sequence[int], max_dim: int = DEFAULT_MAX_DIM) -> FockSpace:
    """Validated FockSpace constructor.

    Rejects non-positive cutoffs and dimensions above ``max_dim``.
    """
    if num_modes < 1:
        raise ValueError("num_modes must be >= 1")
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != num_modes:
        raise ValueError("need one cutoff per mode")
    if any(c < 1 for c in cutoffs):
        raise ValueError(f"cutoffs must be >= 1, got {cutoffs}")
    dim = 1
    for c in cutoffs:
        dim *= c + 1
    if dim > max_dim:
        raise ValueError(f"dimension {dim} exceeds memory budget {max_dim}")
    return FockSpace(num_modes=num_modes, cutoffs=cutoffs)


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Dense matrix of a single-mode (or hopping) operator on the full space."""

    matrix: np.ndarray
    label: str


def _single_mode_annihilation(cutoff: int) -> np.ndarray:
    # <n-1|a|n> = sqrt(n) on the superdiagonal
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1).astype(complex)


def mode_operator(space: FockSpace, mode: int, kind: str, target: int | None = None) -> ModeOperator:
    """Ladder / number / hop operator embedded in the full truncated space.

    kind is one of "annihilation", "creation", "number", "hop".  For "hop"
    the operator is a_target† a_mode, moving one quantum from ``mode`` to
    ``target``.
    """
    if not 0 <= mode < space.num_modes:
        raise ValueError(f"mode {mode} out of range for {space.num_modes}-mode space")

    def embedded(m: int) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for k in range(space.num_modes):
            d = space.cutoffs[k] + 1
            blk = _single_mode_annihilation(space.cutoffs[k]) if k == m else np.eye(d)
            out = np.kron(out, blk)
        return out

    if kind == "annihilation":
        return ModeOperator(embedded(mode), f"a[{mode}]")
    if kind == "creation":
        return ModeOperator(embedded(mode).conj().T, f"a_dag[{mode}]")
    if kind == "number":
        a = embedded(mode)
        return ModeOperator(a.conj().T @ a, f"n[{mode}]")
    if kind == "hop":
        if target is None or not 0 <= target < space.num_modes:
            raise ValueError("hop needs a valid target mode")
        return ModeOperator(embedded(target).conj().T @ embedded(mode), f"hop[{mode}->{target}]")
    raise ValueError(f"unknown operator kind {kind!r}")


def build_hamiltonian(space: FockSpace, coeff: np.ndarray) -> np.ndarray:
    """Quadratic Hamiltonian sum_jk coeff[j,k] a_j† a_k on the full space.

    coeff must be num_modes x num_modes; no squeezing (a†a† / aa) terms.
    """
    coeff = np.asarray(coeff, dtype=complex)
    if coeff.shape != (space.num_modes, space.num_modes):
        raise ValueError(f"coefficient matrix must be {space.num_modes}x{space.num_modes}")
    ann = [mode_operator(space, k, "annihilation").matrix for k in range(space.num_modes)]
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for j in range(space.num_modes):
        for k in range(space.num_modes):
            if coeff[j, k] != 0:
                out += coeff[j, k] * (ann[j].conj().T @ ann[k])
    return out


def total_number_operator(space: FockSpace) -> np.ndarray:
    occ = np.array([sum(o) for o in space.occupations()], dtype=float)
    return np.diag(occ).astype(complex)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure vector or density matrix over a FockSpace basis.

    ``norm_tracked`` stores the squared norm (pure) or trace (density) at
    construction; evolution code keeps it as an observable rather than
    renormalizing.  ``truncation_tail`` is the probability mass the factory
    discarded when projecting onto the truncated space.
    """

    space: FockSpace
    kind: str  # "pure" | "density"
    data: np.ndarray
    frame: str = "laboratory"
    norm_tracked: float = 1.0
    truncation_tail: float = 0.0

    def __post_init__(self):
        if self.kind not in ("pure", "density"):
            raise ValueError("kind must be 'pure' or 'density'")
        expect = (self.space.dim,) if self.kind == "pure" else (self.space.dim, self.space.dim)
        if self.data.shape != expect:
            raise ValueError(f"state data shape {self.data.shape}, expected {expect}")

    def density(self) -> np.ndarray:
        if self.kind == "density":
            return self.data
        return np.outer(self.data, self.data.conj())


def _embed_single_mode(space: FockSpace, mode: int, amps: np.ndarray) -> np.ndarray:
    """Tensor a single-mode amplitude vector with vacuum on the other modes."""
    vec = np.array([1.0 + 0j])
    for k in range(space.num_modes):
        d = space.cutoffs[k] + 1
        if k == mode:
            blk = np.zeros(d, dtype=complex)
            blk[: len(amps)] = amps
        else:
            blk = np.zeros(d, dtype=complex)
            blk[0] = 1.0
        vec = np.kron(vec, blk)
    return vec


def fock_state(space: FockSpace, mode: int, n: int) -> QuantumState:
    """|n> in the given mode, vacuum elsewhere."""
    if not 0 <= n <= space.cutoffs[mode]:
        raise ValueError(f"occupation {n} exceeds cutoff {space.cutoffs[mode]}")
    occ = [0] * space.num_modes
    occ[mode] = n
    return QuantumState(space, "pure", space.basis_vector(occ))


def _log_poisson(n: np.ndarray, mean: float) -> np.ndarray:
    return -mean + n * np.log(mean) - gammaln(n + 1)


def coherent_state(space: FockSpace, mode: int, alpha: complex,
                   tail_threshold: float = 1e-6) -> QuantumState:
    """Truncated coherent state, renormalized, with exact Poisson tail report."""
    c = space.cutoffs[mode]
    n = np.arange(c + 1)
    mean = abs(alpha) ** 2
    if mean == 0:
        return fock_state(space, mode, 0)
    # amplitudes alpha^n / sqrt(n!), normalized against the untruncated state
    log_mag = 0.5 * _log_poisson(n, mean)
    amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    # retained mass of the untruncated state: regularized upper incomplete gamma
    retained = float(gammaincc(c + 1, mean))
    tail = 1.0 - retained
    if tail > tail_threshold:
        raise TruncationError(f"coherent tail mass {tail:.3e} above threshold {tail_threshold:.1e}")
    amps = amps / np.linalg.norm(amps)
    return QuantumState(space, "pure", _embed_single_mode(space, mode, amps),
                        truncation_tail=tail)


def cat_state(space: FockSpace, mode: int, alpha: complex,
              tail_threshold: float = 1e-6) -> QuantumState:
    """Even cat (|alpha> + |-alpha>)/sqrt(2(1+e^{-2|alpha|^2})), truncated."""
    c = space.cutoffs[mode]
    n = np.arange(c + 1)
    mean = abs(alpha) ** 2
    if mean == 0:
        return fock_state(space, mode, 0)
    norm2 = 2.0 * (1.0 + math.exp(-2.0 * mean))
    log_mag = 0.5 * _log_poisson(n, mean)
    phase = np.exp(1j * n * np.angle(alpha))
    amps = (1.0 + (-1.0) ** n) * np.exp(log_mag) * phase / math.sqrt(norm2)
    retained = float(np.sum(np.abs(amps) ** 2))
    tail = max(0.0, 1.0 - retained)
    if tail > tail_threshold:
        raise TruncationError(f"cat tail mass {tail:.3e} above threshold {tail_threshold:.1e}")
    amps = amps / np.linalg.norm(amps)
    return QuantumState(space, "pure", _embed_single_mode(space, mode, amps),
                        truncation_tail=tail)


def binomial_code_state(space: FockSpace, mode: int) -> QuantumState:
    """Logical code word (sqrt(3)|2> + |6>)/2 in the given mode."""
    if space.cutoffs[mode] < 6:
        raise ValueError("binomial code word needs cutoff >= 6")
    amps = np.zeros(7, dtype=complex)
    amps[2] = math.sqrt(3.0) / 2.0
    amps[6] = 0.5
    return QuantumState(space, "pure", _embed_single_mode(space, mode, amps))


def thermal_state(space: FockSpace, mode: int, nbar: float,
                  tail_threshold: float = 1e-3) -> QuantumState:
    """Thermal mixture p_n = nbar^n / (1+nbar)^{n+1}, truncated and renormalized.

    The geometric tail (nbar/(1+nbar))^{cutoff+1} is folded into the report.
    """
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    c = space.cutoffs[mode]
    n = np.arange(c + 1)
    if nbar == 0:
        return QuantumState(space, "density", fock_state(space, mode, 0).density())
    p = nbar ** n / (1.0 + nbar) ** (n + 1)
    tail = (nbar / (1.0 + nbar)) ** (c + 1)
    if tail > tail_threshold:
        raise TruncationError(f"thermal tail mass {tail:.3e} above threshold {tail_threshold:.1e}")
    p = p / p.sum()
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    occ = [0] * space.num_modes
    for k in range(c + 1):
        occ[mode] = k
        i = space.index_of(occ)
        rho[i, i] = p[k]
    return QuantumState(space, "density", rho, truncation_tail=float(tail))


def fidelity(rho: QuantumState, psi: QuantumState) -> float:
    """<psi|rho|psi> for a pure reference psi.

    Deliberately not clamped to <= 1: under non-Hermitian evolution the
    overlap of an unnormalized state with a target is a meaningful number
    above 1.
    """
    if rho.space is not psi.space and rho.space.cutoffs != psi.space.cutoffs:
        raise ValueError("states live on different spaces")
    if psi.kind != "pure":
        raise ValueError("reference state must be pure")
    if rho.kind == "pure":
        return float(abs(np.vdot(psi.data, rho.data)) ** 2)
    val = np.vdot(psi.data, rho.data @ psi.data)
    return float(val.real)


def state_fidelity(rho: QuantumState, sigma: QuantumState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 for mixed targets.

    Reduces to <psi|sigma|psi> when rho is pure.  Both inputs are
    normalized internally, so this measures state shape only.
    """
    if rho.kind == "pure" and sigma.kind == "pure":
        a = rho.data / np.linalg.norm(rho.data)
        b = sigma.data / np.linalg.norm(sigma.data)
        return float(abs(np.vdot(a, b)) ** 2)
    r = rho.density()
    s = sigma.density()
    r = r / np.trace(r).real
    s = s / np.trace(s).real
    w, v = np.linalg.eigh(r)
    w = np.clip(w, 0.0, None)
    sq = v @ np.diag(np.sqrt(w)) @ v.conj().T
    inner = sq @ s @ sq
    ev = np.linalg.eigvalsh(inner)
    ev = np.clip(ev, 0.0, None)
    return float(np.sum(np.sqrt(ev)) ** 2)
