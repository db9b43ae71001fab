"""Action-angle sector of coherent-state quantization.

With ``z = sqrt(J) e^{i gamma}`` the 2pi-periodic angle function
``gamma in [0, 2pi)`` quantizes to a bounded self-adjoint operator whose
lower symbol is a damped Fourier sine series with coefficients ``d_q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError
from .fock import _check_dim
from .specfun import SeriesControl, log_gamma, log_hyp1f1

__all__ = [
    "ActionAnglePoint",
    "SineSeriesControl",
    "angle_operator",
    "action_operator",
    "commutator_operator",
    "angular_quantize",
    "dq",
    "dq_table",
    "angle_lower_symbol",
    "commutator_symbol",
    "default_qmax",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ActionAnglePoint:
    J: float
    gamma: float

    def __post_init__(self):
        if not (self.J >= 0 and math.isfinite(self.J)):
            raise ValidationError("action J must be finite and >= 0")
        object.__setattr__(self, "gamma", float(self.gamma) % TWO_PI)

    @property
    def z(self) -> complex:
        return math.sqrt(self.J) * complex(math.cos(self.gamma), math.sin(self.gamma))


def default_qmax(J: float) -> int:
    """Empirical harmonic count ``ceil(10 sqrt(J)) + 50``."""
    return int(math.ceil(10.0 * math.sqrt(J))) + 50


@dataclass(frozen=True)
class SineSeriesControl:
    """Harmonic cut-off for the sine/cosine series; ``q_max=None`` means default."""

    q_max: Optional[int] = None
    ctl: SeriesControl = field(default_factory=SeriesControl)

    def __post_init__(self):
        if self.q_max is not None and self.q_max < 1:
            raise ValidationError("q_max must be >= 1")

    def harmonics(self, J: float) -> int:
        return self.q_max if self.q_max is not None else default_qmax(J)


# --------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------

def _gamma_ratio(dim: int) -> np.ndarray:
    """``Gamma((n+n')/2 + 1) / sqrt(n! n'!)`` for ``n, n' < dim``."""
    n = np.arange(dim)
    lf = log_gamma(n + 1.0)
    lg = log_gamma(np.arange(2 * dim - 1) / 2.0 + 1.0)
    return np.exp(lg[n[:, None] + n[None, :]] - 0.5 * (lf[:, None] + lf[None, :]))


def angular_quantize(coeff: Callable[[int], complex], dim: int) -> np.ndarray:
    """CS quantization of ``g(gamma)``, given ``coeff(k) = (1/2pi) int g e^{-ik gamma}``.

    Entry ``(n, n')`` is ``Gamma((n+n')/2+1)/sqrt(n! n'!) * coeff(n' - n)``.
    """
    dim = _check_dim(dim)
    ks = np.arange(-(dim - 1), dim)
    c = np.array([complex(coeff(int(k))) for k in ks])
    n = np.arange(dim)
    return _gamma_ratio(dim) * c[(n[None, :] - n[:, None]) + dim - 1]


def _angle_coeff(k: int) -> complex:
    return math.pi if k == 0 else 1j / k


def angle_operator(dim: int) -> np.ndarray:
    """``pi I + i sum_{n != n'} Gamma((n+n')/2+1)/sqrt(n! n'!) /(n'-n) |e_n><e_n'|``."""
    out = angular_quantize(_angle_coeff, _check_dim(dim, 2))
    # exact self-adjointness: mirror the strict upper triangle
    iu = np.triu_indices(dim, 1)
    out[iu[1], iu[0]] = np.conj(out[iu])
    np.fill_diagonal(out, math.pi)
    return out


def action_operator(dim: int) -> np.ndarray:
    """``A_J = N + 1``."""
    return np.diag(np.arange(1, _check_dim(dim) + 1, dtype=float)).astype(complex)


def commutator_operator(dim: int) -> np.ndarray:
    """``[A_angle, A_J]``: entries ``i Gamma((n+n')/2+1)/sqrt(n! n'!)`` off the diagonal.

    ``A_J`` is diagonal, so the truncated product commutator agrees entry by
    entry with this closed form.
    """
    dim = _check_dim(dim, 2)
    out = 1j * _gamma_ratio(dim)
    np.fill_diagonal(out, 0.0)
    iu = np.triu_indices(dim, 1)
    out[iu[1], iu[0]] = -np.conj(out[iu])
    return out


# --------------------------------------------------------------------------
# Symbols
# --------------------------------------------------------------------------

def dq(q: int, r: float, ctl: Optional[SeriesControl] = None) -> float:
    """``d_q(r) = e^{-r^2} r^q Gamma(q/2+1)/Gamma(q+1) 1F1(q/2+1; q+1; r^2)``, in log space."""
    if int(q) != q or q < 1:
        raise ValidationError("q must be a positive integer")
    if not (r >= 0 and math.isfinite(r)):
        raise ValidationError("r must be finite and >= 0")
    if r == 0:
        return 0.0
    q = int(q)
    x = r * r
    logv = (-x + q * math.log(r) + log_gamma(0.5 * q + 1.0) - log_gamma(q + 1.0)
            + log_hyp1f1(0.5 * q + 1.0, q + 1.0, x, ctl))
    return math.exp(logv)


def dq_table(J: float, q_max: int, ctl: Optional[SeriesControl] = None) -> np.ndarray:
    """``[d_1(sqrt J), ..., d_qmax(sqrt J)]``."""
    r = math.sqrt(J)
    return np.array([dq(q, r, ctl) for q in range(1, q_max + 1)])


def _coerce(pt, gamma):
    if isinstance(pt, ActionAnglePoint):
        return pt.J, np.asarray(pt.gamma, dtype=float)
    if gamma is None:
        raise ValidationError("give an ActionAnglePoint or (J, gamma)")
    J = float(pt)
    if not J >= 0:
        raise ValidationError("action J must be >= 0")
    return J, np.mod(np.asarray(gamma, dtype=float), TWO_PI)


def angle_lower_symbol(pt, gamma=None, ctl: Optional[SineSeriesControl] = None):
    """``pi - 2 sum_{q<=q_max} d_q(sqrt J) sin(q gamma)/q``; ``gamma`` may be an array."""
    ctl = ctl or SineSeriesControl()
    J, g = _coerce(pt, gamma)
    qm = ctl.harmonics(J)
    d = dq_table(J, qm, ctl.ctl)
    q = np.arange(1, qm + 1)
    s = np.sin(np.multiply.outer(g, q)) @ (d / q)
    out = math.pi - 2.0 * s
    return float(out) if np.ndim(out) == 0 else out


def commutator_symbol(pt, gamma=None, ctl: Optional[SineSeriesControl] = None):
    """``C(J, gamma) = 2 sum_q d_q(sqrt J) cos(q gamma)``, so that
    ``<z|[A_angle, A_J]|z> = i C``."""
    ctl = ctl or SineSeriesControl()
    J, g = _coerce(pt, gamma)
    qm = ctl.harmonics(J)
    d = dq_table(J, qm, ctl.ctl)
    q = np.arange(1, qm + 1)
    out = 2.0 * (np.cos(np.multiply.outer(g, q)) @ d)
    return float(out) if np.ndim(out) == 0 else out
