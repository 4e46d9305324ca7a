"""Control-pulse synthesis for the two-mode cavity/magnon transfer protocol.

Given angle schedules theta(t), alpha(t), a coupling phase phi, gain/loss
configuration (gamma_a, phi_a, gamma_b) and a dissipative coupling Gamma,
this module produces the coupling strength J(t), detuning Delta(t) and the
full 2x2 coefficient matrix that make the stationary-frame coefficient
matrix upper triangular.  It also integrates the complex global phase of
the activated passage, whose real part is a physical phase and whose real
accumulation X(t) fixes the state norm as exp(n X(t)) for an n-excitation
payload.

Rate convention: the scaling factor lambda sets gamma_a = lambda*thdot/pi
and |Gamma| = lambda*thdot/2 for the linear ramp theta = pi t / (2 tau).
With the sign Gamma = -lambda*thdot/2 the net integral of X'(t) over one
protocol vanishes, so the norm returns to one at t = tau.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .ancillary_frames import (
    FrameParams,
    Schedule,
    frame_matrix,
    gauge_potential,
)

__all__ = [
    "GammaSign",
    "ControlSchedule",
    "PulseSample",
    "PhaseRecord",
    "SingularPulse",
    "SingularDetuning",
    "theta_linear",
    "rates_from_lambda",
    "linear_transfer_schedule",
    "synthesize_pulses",
    "global_phase",
    "check_norm_restoration",
]

# |cos(phi+alpha)| below this counts as structurally zero when deciding
# whether the cot(2 theta) detuning term cancels analytically.
_STRUCTURAL_ZERO = 1e-12
_SIN2_SINGULAR = 1e-9


class SingularPulse(ValueError):
    """sin(phi + alpha(t)) = 0: the coupling constraint has no solution."""


class SingularDetuning(ValueError):
    """sin(2 theta(t)) = 0 with non-cancelling singular detuning terms."""


class GammaSign(str, enum.Enum):
    LITERAL = "literal"
    NORM_RESTORING = "norm-restoring"
    FLIPPED = "flipped"  # deliberately anti-restoring; negative controls only


def theta_linear(tau: float) -> Schedule:
    """Linear ramp theta(t) = pi t / (2 tau), from 0 to pi/2 over one protocol."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return Schedule.linear(math.pi / (2.0 * tau))


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Full parametrization of one transfer protocol.

    phi_a selects loss (0) or gain (pi) on mode a; Theta in {0, pi} sets the
    sign with which the dissipative coupling enters the Hamiltonian.
    Rates are in units of 1/tau.
    """

    theta: Schedule
    alpha: Schedule
    phi: float
    phi_a: float
    gamma_a: float
    gamma_b: float
    Gamma: float
    Theta: float = 0.0
    lam: float | None = None
    tau: float = 1.0

    def __post_init__(self):
        for name, val in (("phi_a", self.phi_a), ("Theta", self.Theta)):
            if min(abs(val), abs(val - math.pi)) > 1e-9:
                raise ValueError(f"{name} must be 0 or pi, got {val}")
        if self.gamma_a < 0 or self.gamma_b < 0:
            raise ValueError("gamma_a and gamma_b must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    @property
    def gamma_eff(self) -> float:
        """Signed dissipative coupling as it enters the Hamiltonian, Gamma cos(Theta)."""
        return self.Gamma * math.cos(self.Theta)

    def frame_params(self) -> FrameParams:
        return FrameParams(thetas=(self.theta,), alphas=(self.alpha,))

    def with_gamma_sign(self, sign_mode: GammaSign) -> "ControlSchedule":
        """Same protocol with the dissipative-coupling sign re-resolved."""
        if self.lam is None:
            raise ValueError("schedule was not built from a lambda rule")
        thdot = self.theta.derivative(0.0)
        _, g = rates_from_lambda(self.lam, thdot, sign_mode, phi_a=self.phi_a,
                                 gamma_b=self.gamma_b)
        return replace(self, Gamma=g)


@dataclass(frozen=True, eq=False)
class PulseSample:
    t: float
    J: float
    Delta: float
    Ha: np.ndarray  # 2x2 coefficient matrix


def rates_from_lambda(lam: float, theta_dot: float,
                      sign_mode: GammaSign = GammaSign.NORM_RESTORING,
                      phi_a: float = 0.0, gamma_b: float | None = None) -> tuple[float, float]:
    """(gamma_a, Gamma) from the scaling factor lambda for a constant-slope ramp.

    gamma_a = lambda*theta_dot/pi and |Gamma| = lambda*theta_dot/2.  For
    NORM_RESTORING the sign is the one that zeroes the accumulated norm
    exponent integral(gamma_a cos(phi_a) cos^2 + gamma_b sin^2 +
    Gamma sin 2theta) over the ramp; when that integral is sign-blind (the
    balanced gain/loss configuration) the literal negative sign is kept.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    gamma_a = lam * theta_dot / math.pi
    magnitude = lam * theta_dot / 2.0
    if gamma_b is None:
        gamma_b = gamma_a
    if sign_mode == GammaSign.FLIPPED:
        return gamma_a, +magnitude
    if sign_mode == GammaSign.LITERAL or magnitude == 0.0:
        return gamma_a, -magnitude
    # For theta = theta_dot * t over [0, tau]: integral cos^2 = integral
    # sin^2 = tau/2 and integral sin(2 theta) = 2 tau / pi * (theta_dot tau
    # = pi/2).  X(tau) = -[ (ga cos(phi_a) + gb) tau/2 + Gamma 2tau/pi ].
    drift = (gamma_a * math.cos(phi_a) + gamma_b) / 2.0
    coupling_weight = 2.0 / math.pi
    best = None
    for sign in (-1.0, +1.0):
        leftover = abs(drift + sign * magnitude * coupling_weight)
        if best is None or leftover < best[0] - 1e-15:
            best = (leftover, sign)
    return gamma_a, best[1] * magnitude


def linear_transfer_schedule(lam: float, phi_a: float, phi: float = math.pi / 2,
                             tau: float = 1.0,
                             sign_mode: GammaSign = GammaSign.NORM_RESTORING,
                             Theta: float = 0.0,
                             dissipative: bool = True) -> ControlSchedule:
    """Canonical protocol: linear theta ramp, alpha = 0, rates from lambda.

    dissipative=False zeroes Gamma (balanced gain/loss configurations keep
    only the mode rates).
    """
    theta = theta_linear(tau)
    thdot = theta.derivative(0.0)
    gamma_a, gamma = rates_from_lambda(lam, thdot, sign_mode, phi_a=phi_a)
    if not dissipative:
        gamma = 0.0
    return ControlSchedule(theta=theta, alpha=Schedule.constant(0.0), phi=phi,
                           phi_a=phi_a, gamma_a=gamma_a, gamma_b=gamma_a,
                           Gamma=gamma, Theta=Theta, lam=lam, tau=tau)


def synthesize_pulses(s: ControlSchedule, t: float) -> PulseSample:
    """Coupling J(t), detuning Delta(t) and the 2x2 coefficient matrix at t.

    Raises SingularPulse when sin(phi + alpha) vanishes and SingularDetuning
    when sin(2 theta) vanishes without the singular terms cancelling
    analytically (they do for the presets, where cos(phi + alpha) and
    sin(alpha) are identically zero).
    """
    th = s.theta.value(t)
    al = s.alpha.value(t)
    thdot = s.theta.derivative(t)
    aldot = s.alpha.derivative(t)
    g_eff = s.gamma_eff

    sin_pa = math.sin(s.phi + al)
    cos_pa = math.cos(s.phi + al)
    if abs(sin_pa) < _STRUCTURAL_ZERO:
        raise SingularPulse(f"sin(phi+alpha) = {sin_pa:.2e} at t = {t}")

    s2, c2 = math.sin(2.0 * th), math.cos(2.0 * th)
    J = (thdot + g_eff * math.cos(al) * c2
         - (s.gamma_a * math.cos(s.phi_a) - s.gamma_b) * math.sin(th) * math.cos(th)) / sin_pa

    # Detuning: the two 1/sin(2 theta) terms are dropped when their
    # numerators are structurally zero, otherwise a vanishing sin(2 theta)
    # is an error rather than an extrapolation.
    term_cot = 0.0
    term_alpha = 0.0
    cot_active = abs(J * cos_pa) > _STRUCTURAL_ZERO
    alpha_active = abs(g_eff * math.sin(al)) > _STRUCTURAL_ZERO
    if cot_active or alpha_active:
        if abs(s2) < _SIN2_SINGULAR:
            raise SingularDetuning(
                f"sin(2 theta) = {s2:.2e} at t = {t} with non-cancelling detuning terms")
        if cot_active:
            term_cot = J * cos_pa * c2 / s2
        if alpha_active:
            term_alpha = g_eff * math.sin(al) / s2
    Delta = aldot - 2.0 * (term_cot + term_alpha + s.gamma_a * math.sin(s.phi_a) / 2.0)

    gamma_coupling = 1j * s.Gamma * complex(math.cos(s.Theta), math.sin(s.Theta))
    ha = np.array([
        [Delta / 2.0 - 1j * s.gamma_a * complex(math.cos(s.phi_a), math.sin(s.phi_a)),
         J * complex(math.cos(s.phi), math.sin(s.phi)) + gamma_coupling],
        [J * complex(math.cos(s.phi), -math.sin(s.phi)) + gamma_coupling,
         -Delta / 2.0 - 1j * s.gamma_b],
    ])
    return PulseSample(t=t, J=J, Delta=Delta, Ha=ha)


@dataclass(frozen=True, eq=False)
class PhaseRecord:
    """Cumulative passage phase on a time grid.

    The state amplitude multiplier per excitation is exp(i f_r(t) + X(t)):
    f_r is the real phase and X_signed the log-norm accumulation, so
    f_i(t) = -i X_signed(t) in the f_1 = f_r + f_i decomposition.  Both
    start at zero.
    """

    times: np.ndarray
    f_r: np.ndarray
    X_signed: np.ndarray
    passage: str  # "ket" | "dual"

    def f_r_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.f_r))

    def X_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.X_signed))


def _passage_exponent_rate(s: ControlSchedule, t: float, passage: str) -> complex:
    """d/dt of the complex passage exponent, as -(rotated diagonal entry).

    ket: the first diagonal entry of the rotated coefficient matrix drives
    the creation passage of the first ancillary mode; dual: the conjugated
    last diagonal entry drives the creation passage of the last ancillary
    mode under the adjoint Hamiltonian.
    """
    params = s.frame_params()
    md = frame_matrix(params, t).m_dagger
    gauge = gauge_potential(params, t).matrix
    hmu = md @ synthesize_pulses(s, t).Ha @ md.conj().T
    n = params.num_modes
    if passage == "ket":
        z = hmu[0, 0] - gauge[0, 0]
    elif passage == "dual":
        z = np.conj(hmu[n - 1, n - 1]) - gauge[n - 1, n - 1]
    else:
        raise ValueError("passage must be 'ket' or 'dual'")
    # amplitude multiplier is exp(-i integral z): f_r' = -Re z, X' = -Im z
    return complex(-z.real, -z.imag)


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                      tol: float, depth: int = 24) -> float:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)

    def recurse(a, b, fa, fm, fb, whole, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth <= 0 or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(a, m, fa, flm, fm, left, depth - 1)
                + recurse(m, b, fm, frm, fb, right, depth - 1))

    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return recurse(a, b, fa, fm, fb, whole, depth)


def global_phase(s: ControlSchedule, grid: np.ndarray, passage: str = "ket",
                 tol: float = 1e-12) -> PhaseRecord:
    """Cumulative f_r and X_signed on the given time grid.

    Integrated per interval with adaptive Simpson so the record is accurate
    wherever the grid is, independent of grid density.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with >= 2 points")

    def rate(t: float) -> complex:
        return _passage_exponent_rate(s, t, passage)

    f_r = np.zeros_like(grid)
    x = np.zeros_like(grid)
    for i in range(1, len(grid)):
        a, b = grid[i - 1], grid[i]
        f_r[i] = f_r[i - 1] + _adaptive_simpson(lambda t: rate(t).real, a, b, tol)
        x[i] = x[i - 1] + _adaptive_simpson(lambda t: rate(t).imag, a, b, tol)
    return PhaseRecord(times=grid, f_r=f_r, X_signed=x, passage=passage)


def check_norm_restoration(s: ControlSchedule, passage: str = "ket",
                           tol: float = 1e-12) -> float:
    """|X_signed(tau)|: zero (within integrator tolerance) certifies that the
    passage returns the state norm to its initial value at t = tau."""
    x_tau = _adaptive_simpson(lambda t: _passage_exponent_rate(s, t, passage).imag,
                              0.0, s.tau, tol)
    return abs(x_tau)
