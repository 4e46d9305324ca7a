"""Time-dependent ancillary mode frames for N bosonic modes.

A unitary N x N frame matrix M†(t), parametrized by angle schedules
theta_k(t), alpha_k(t), mixes the laboratory annihilation operators into
ancillary modes mu_k(t).  Rotating to the frame where these modes are
stationary produces a Hermitian gauge potential A(t) = i M†(t) dM(t)/dt
that is subtracted from the rotated coefficient matrix.  The control
condition used throughout this package is that M†(t) H(t) M(t) - A(t)
is upper triangular, which decouples the first ancillary creation
operator and the last annihilation operator into exactly solvable
passages.

The truncated-space unitary V(t) realizing the frame rotation is a
product of number-conserving exponentials, one (alpha, theta) pair per
recursion level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .fock_space import FockSpace, mode_operator

__all__ = [
    "Schedule",
    "FrameParams",
    "FrameMatrix",
    "GaugePotential",
    "TriangularCheck",
    "bright_vector",
    "frame_matrix",
    "frame_matrix_derivative",
    "gauge_potential",
    "rotated_coefficients",
    "check_upper_triangular",
    "frame_unitary",
]


class Schedule:
    """Scalar function of time with a derivative accessor.

    Derivatives are analytic when provided, otherwise a central finite
    difference with step ``h`` (agreeing with the value accessor to O(h^2)).
    """

    def __init__(self, f: Callable[[float], float],
                 df: Callable[[float], float] | None = None, h: float = 1e-6):
        self._f = f
        self._df = df
        self._h = h

    def value(self, t: float) -> float:
        return float(self._f(t))

    def derivative(self, t: float) -> float:
        if self._df is not None:
            return float(self._df(t))
        h = self._h
        return (self._f(t + h) - self._f(t - h)) / (2.0 * h)

    @classmethod
    def constant(cls, x: float) -> "Schedule":
        return cls(lambda t: x, lambda t: 0.0)

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "Schedule":
        return cls(lambda t: intercept + slope * t, lambda t: slope)


@dataclass(frozen=True, eq=False)
class FrameParams:
    """Angle schedules theta_k, alpha_k for k = 1..N-1 of an N-mode frame."""

    thetas: tuple[Schedule, ...]
    alphas: tuple[Schedule, ...]

    def __post_init__(self):
        if len(self.thetas) != len(self.alphas) or not self.thetas:
            raise ValueError("need matching, non-empty theta and alpha schedule lists")

    @property
    def num_modes(self) -> int:
        return len(self.thetas) + 1


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    m_dagger: np.ndarray
    t: float


@dataclass(frozen=True, eq=False)
class GaugePotential:
    matrix: np.ndarray
    t: float


@dataclass(frozen=True)
class TriangularCheck:
    passed: bool
    residual: float


def _bright_and_derivative(params: FrameParams, k: int, t: float):
    """Bright vector b_k(t) and its time derivative, built by recursion.

    b_0 = (1,);  b_k = (sin(th_k) e^{i a_k/2} b_{k-1}, cos(th_k) e^{-i a_k/2}).
    """
    b = np.array([1.0 + 0j])
    bd = np.array([0.0 + 0j])
    for i in range(1, k + 1):
        th = params.thetas[i - 1].value(t)
        al = params.alphas[i - 1].value(t)
        thd = params.thetas[i - 1].derivative(t)
        ald = params.alphas[i - 1].derivative(t)
        s, c = np.sin(th), np.cos(th)
        ep, em = np.exp(0.5j * al), np.exp(-0.5j * al)
        head = s * ep * b
        head_d = (thd * c + 0.5j * ald * s) * ep * b + s * ep * bd
        last = c * em
        last_d = (-thd * s - 0.5j * ald * c) * em
        b = np.concatenate([head, [last]])
        bd = np.concatenate([head_d, [last_d]])
    return b, bd


def bright_vector(params: FrameParams, k: int, t: float) -> np.ndarray:
    """(k+1)-dimensional unit bright vector b_k(t); k ranges over 1..N-1."""
    if not 1 <= k <= params.num_modes - 1:
        raise ValueError(f"k must be in 1..{params.num_modes - 1}")
    return _bright_and_derivative(params, k, t)[0]


def _rows_and_derivatives(params: FrameParams, t: float):
    n = params.num_modes
    rows = np.zeros((n, n), dtype=complex)
    drows = np.zeros((n, n), dtype=complex)
    for k in range(1, n):
        th = params.thetas[k - 1].value(t)
        al = params.alphas[k - 1].value(t)
        thd = params.thetas[k - 1].derivative(t)
        ald = params.alphas[k - 1].derivative(t)
        s, c = np.sin(th), np.cos(th)
        ep, em = np.exp(0.5j * al), np.exp(-0.5j * al)
        b, bd = _bright_and_derivative(params, k - 1, t)
        rows[k - 1, :k] = c * ep * b
        rows[k - 1, k] = -s * em
        drows[k - 1, :k] = (-thd * s + 0.5j * ald * c) * ep * b + c * ep * bd
        drows[k - 1, k] = (-thd * c + 0.5j * ald * s) * em
    b, bd = _bright_and_derivative(params, n - 1, t)
    rows[n - 1, :] = b
    drows[n - 1, :] = bd
    return rows, drows


def frame_matrix(params: FrameParams, t: float) -> FrameMatrix:
    """Unitary M†(t) whose rows are the ancillary-mode coefficient vectors."""
    rows, _ = _rows_and_derivatives(params, t)
    return FrameMatrix(rows, t)


def frame_matrix_derivative(params: FrameParams, t: float) -> np.ndarray:
    """d M†(t) / dt, from the schedules' analytic derivatives."""
    return _rows_and_derivatives(params, t)[1]


def gauge_potential(params: FrameParams, t: float, analytic: bool = True,
                    fd_step: float = 1e-6) -> GaugePotential:
    """Hermitian gauge potential A(t) = i M†(t) dM(t)/dt of the frame rotation.

    Equivalently A = -i (dM†/dt) M.  The analytic path differentiates the
    schedules; the finite-difference fallback differentiates M† directly.
    """
    md = frame_matrix(params, t).m_dagger
    if analytic:
        mdot_dagger = frame_matrix_derivative(params, t)
    else:
        mp = frame_matrix(params, t + fd_step).m_dagger
        mm = frame_matrix(params, t - fd_step).m_dagger
        mdot_dagger = (mp - mm) / (2.0 * fd_step)
    a = -1j * (mdot_dagger @ md.conj().T)
    return GaugePotential(a, t)


def rotated_coefficients(coeff: np.ndarray, params: FrameParams, t: float) -> np.ndarray:
    """Coefficient matrix in the stationary ancillary frame: M† H M - A."""
    coeff = np.asarray(coeff, dtype=complex)
    n = params.num_modes
    if coeff.shape != (n, n):
        raise ValueError(f"coefficient matrix must be {n}x{n}")
    md = frame_matrix(params, t).m_dagger
    a = gauge_potential(params, t).matrix
    return md @ coeff @ md.conj().T - a


def check_upper_triangular(matrix: np.ndarray, tol: float) -> TriangularCheck:
    """Largest below-diagonal magnitude and whether it clears ``tol``."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    below = np.tril(matrix, k=-1)
    residual = float(np.max(np.abs(below))) if matrix.shape[0] > 1 else 0.0
    return TriangularCheck(residual <= tol, residual)


def _bright_mode_operator(space: FockSpace, bvec: np.ndarray) -> np.ndarray:
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for j, w in enumerate(bvec):
        if w != 0:
            out += w * mode_operator(space, j, "annihilation").matrix
    return out


def frame_unitary(space: FockSpace, params: FrameParams, t: float,
                  order: str = "alpha_theta") -> np.ndarray:
    """Truncated-space unitary V(t) with V†(t) mu_k(t) V(t) = mu_k(0).

    V is the product over recursion levels k of one phase factor and one
    beam-splitter factor between the bright mode B_{k-1}(0) and lab mode
    a_{k+1}:

        V_alpha = exp(-i (alpha_k(t)-alpha_k(0))/2 (B†B - a†a))
        V_theta = exp(-(theta_k(t)-theta_k(0)) (e^{i alpha_k(0)} a†B - h.c.))

    order "alpha_theta" applies V_alpha V_theta per level (the canonical
    factorization).  order "theta_alpha" swaps the two factors, in which
    case the beam-splitter phase must be alpha_k(t); both orders then
    implement the same rotation even though the factors do not commute.
    Unitarity is exact up to truncation at the cutoff boundary.
    """
    if order not in ("alpha_theta", "theta_alpha"):
        raise ValueError("order must be 'alpha_theta' or 'theta_alpha'")
    n = params.num_modes
    if space.num_modes != n:
        raise ValueError("space mode count does not match frame params")
    v = np.eye(space.dim, dtype=complex)
    for k in range(1, n):
        th0 = params.thetas[k - 1].value(0.0)
        al0 = params.alphas[k - 1].value(0.0)
        tht = params.thetas[k - 1].value(t)
        alt = params.alphas[k - 1].value(t)
        d_th, d_al = tht - th0, alt - al0
        bvec = np.array([1.0 + 0j]) if k == 1 else _bright_and_derivative(params, k - 1, 0.0)[0]
        b_op = _bright_mode_operator(space, bvec)
        a_op = mode_operator(space, k, "annihilation").matrix
        gen_alpha = -0.5j * d_al * (b_op.conj().T @ b_op - a_op.conj().T @ a_op)
        phase = al0 if order == "alpha_theta" else alt
        gen_theta = -d_th * (np.exp(1j * phase) * a_op.conj().T @ b_op
                             - np.exp(-1j * phase) * b_op.conj().T @ a_op)
        if order == "alpha_theta":
            v = v @ expm(gen_alpha) @ expm(gen_theta)
        else:
            v = v @ expm(gen_theta) @ expm(gen_alpha)
    return v
