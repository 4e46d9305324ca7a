"""Eigenvalue dynamics, symmetry classification, degeneracy detection and
the coupled-mode scattering matrix of the two-mode coefficient matrix.

The closed-form eigenvalues of the 2x2 coefficient matrix are

    E_pm = -i (gamma_a e^{i phi_a} + gamma_b)/2 +- sqrt(disc)/2

with the discriminant

    disc = Delta^2 - (gamma_a e^{i phi_a} - gamma_b)^2 + 4 (J^2 - G^2)
           + i [ 8 J G cos(phi) - 2 Delta (gamma_a e^{i phi_a} - gamma_b) ]

where G is the signed dissipative coupling as it enters the Hamiltonian.
Spectral degeneracies (simultaneous coalescence of eigenvalues and
eigenvectors) sit at disc = 0; along the protocols treated here disc is
real, so degeneracy crossings are sign changes of the discriminant.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .pulse_synthesis import ControlSchedule, synthesize_pulses

__all__ = [
    "SpectrumPoint",
    "ScatteringSample",
    "PTClassification",
    "eigenvalues",
    "pt_classify",
    "detect_eps",
    "scattering_matrix",
    "nonreciprocity",
]


@dataclass(frozen=True)
class SpectrumPoint:
    t: float
    E_plus: complex
    E_minus: complex
    discriminant: complex
    gap: float


@dataclass(frozen=True)
class PTClassification:
    symmetric: bool
    phase: str  # "unbroken" | "broken" | "not-applicable"


def _discriminant(s: ControlSchedule, t: float) -> tuple[complex, complex]:
    sample = synthesize_pulses(s, t)
    ga_c = s.gamma_a * cmath.exp(1j * s.phi_a)
    g = s.gamma_eff
    disc = (sample.Delta ** 2 - (ga_c - s.gamma_b) ** 2
            + 4.0 * (sample.J ** 2 - g ** 2)
            + 1j * (8.0 * sample.J * g * math.cos(s.phi)
                    - 2.0 * sample.Delta * (ga_c - s.gamma_b)))
    offset = -0.5j * (ga_c + s.gamma_b)
    return disc, offset


def eigenvalues(s: ControlSchedule, t: float,
                prev: SpectrumPoint | None = None) -> SpectrumPoint:
    """Closed-form eigenvalue pair at time t with branch continuity.

    When ``prev`` is given, the square-root branch is chosen so each
    eigenvalue continues the nearer one of the previous point; this keeps
    E_pm(t) continuous through degeneracies instead of jumping with the
    principal branch.
    """
    disc, offset = _discriminant(s, t)
    root = cmath.sqrt(disc)
    e_plus = offset + 0.5 * root
    e_minus = offset - 0.5 * root
    if prev is not None:
        stay = abs(e_plus - prev.E_plus) + abs(e_minus - prev.E_minus)
        swap = abs(e_minus - prev.E_plus) + abs(e_plus - prev.E_minus)
        if swap < stay:
            e_plus, e_minus = e_minus, e_plus
    return SpectrumPoint(t=t, E_plus=e_plus, E_minus=e_minus,
                         discriminant=disc, gap=abs(e_plus - e_minus))


def spectrum_series(s: ControlSchedule, grid: np.ndarray) -> list[SpectrumPoint]:
    """Branch-tracked spectrum along a time grid."""
    points: list[SpectrumPoint] = []
    prev = None
    for t in np.asarray(grid, dtype=float):
        prev = eigenvalues(s, float(t), prev)
        points.append(prev)
    return points


def pt_classify(s: ControlSchedule, t: float, delta_tol: float = 1e-10) -> PTClassification:
    """Parity-time classification of the protocol Hamiltonian at time t.

    Symmetric requires balanced gain/loss (phi_a = pi, gamma_a = gamma_b),
    no dissipative coupling and zero detuning; the phase is unbroken when
    the spectrum is real (J > gamma_a), broken otherwise.
    """
    sample = synthesize_pulses(s, t)
    symmetric = (abs(s.phi_a - math.pi) < 1e-9
                 and abs(s.gamma_a - s.gamma_b) < 1e-12
                 and abs(s.gamma_eff) < 1e-15
                 and abs(sample.Delta) < delta_tol)
    if not symmetric:
        return PTClassification(False, "not-applicable")
    phase = "unbroken" if abs(sample.J) > s.gamma_a else "broken"
    return PTClassification(True, phase)


def detect_eps(s: ControlSchedule, grid: np.ndarray,
               gap_scale_tol: float = 1e-6) -> list[float]:
    """Times where eigenvalues and eigenvectors coalesce (defective matrix).

    Implemented as sign-change bracketing of the real discriminant followed
    by root refinement; a tangential touch without sign change does not
    count as a crossing.  Each refined root is confirmed by the gap there
    dropping below gap_scale_tol * max(|E|, 1/tau); with no sign change the
    list is empty.
    """
    grid = np.asarray(grid, dtype=float)
    pts = spectrum_series(s, grid)
    disc = np.array([p.discriminant for p in pts])
    scale = max(float(np.max(np.abs(disc))), 1e-30)
    if np.max(np.abs(disc.imag)) > 1e-9 * scale:
        raise ValueError("discriminant is not real along this protocol; "
                         "sign-change bracketing does not apply")
    energy_scale = max(max(abs(p.E_plus) for p in pts),
                       max(abs(p.E_minus) for p in pts), 1.0 / s.tau)

    # Deadband around zero: grid values inside it carry no usable sign, so
    # endpoint touches (discriminant tangent to zero) are not crossings.
    d = disc.real
    floor = 1e-12 * scale
    signs = np.where(d > floor, 1, np.where(d < -floor, -1, 0))

    f = lambda t: _discriminant(s, t)[0].real
    roots: list[float] = []
    last_sign = 0
    last_idx = -1
    for i, sgn in enumerate(signs):
        if sgn == 0:
            continue
        if last_sign != 0 and sgn != last_sign:
            root = float(brentq(f, grid[last_idx], grid[i], xtol=1e-15, rtol=8.9e-16))
            gap = eigenvalues(s, root).gap
            if gap <= gap_scale_tol * energy_scale:
                roots.append(root)
        last_sign, last_idx = sgn, i
    return roots


@dataclass(frozen=True, eq=False)
class ScatteringSample:
    t: float
    S: np.ndarray  # 2x2
    gamma_1: float
    omega: float


def scattering_matrix(s: ControlSchedule, t: float, gamma_1: float,
                      omega: float = 0.0) -> ScatteringSample:
    """Coupled-mode scattering matrix S = I - i K† (omega - H)^-1 K.

    K = sqrt(2 gamma_1) I couples both modes to external ports with rate
    gamma_1 (part of the total mode loss).
    """
    if gamma_1 < 0:
        raise ValueError("gamma_1 must be >= 0")
    ha = synthesize_pulses(s, t).Ha
    resolvent_arg = omega * np.eye(2) - ha
    if abs(np.linalg.det(resolvent_arg)) < 1e-300:
        raise ValueError(f"resolvent singular at t = {t}, omega = {omega}")
    smat = np.eye(2) - 2j * gamma_1 * np.linalg.inv(resolvent_arg)
    return ScatteringSample(t=t, S=smat, gamma_1=gamma_1, omega=omega)


def nonreciprocity(s: ControlSchedule, gamma_1: float, tau: float | None = None) -> float:
    """log10 |S21/S12| at the end of the protocol, on resonance.

    Zero for a reciprocal system; +inf marks a vanishing S12.
    """
    t_end = s.tau if tau is None else tau
    smat = scattering_matrix(s, t_end, gamma_1, omega=0.0).S
    s12, s21 = abs(smat[0, 1]), abs(smat[1, 0])
    if s12 == 0.0:
        return math.inf
    return math.log10(s21 / s12)
