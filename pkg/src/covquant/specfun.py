"""Special-function kernels: log-Gamma, associated Laguerre polynomials, 1F1.

Everything here is a pure function of its arguments.  Laguerre polynomials
are evaluated by the upward three-term recurrence, which is stable for
non-negative arguments; ``log_gamma`` is a Lanczos approximation and ``hyp1f1``
sums the Kummer series directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonConvergence

__all__ = [
    "SeriesControl",
    "SeriesResult",
    "laguerre",
    "laguerre_table",
    "log_gamma",
    "log_factorials",
    "hyp1f1",
    "log_hyp1f1",
]


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule for series summation."""

    rel_tol: float = 1e-16
    max_terms: int = 20000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


class SeriesResult(NamedTuple):
    value: float
    rel_err: float
    terms: int


# --------------------------------------------------------------------------
# Laguerre polynomials
# --------------------------------------------------------------------------

def laguerre_table(nmax: int, alpha: float, t, scale=None) -> np.ndarray:
    """Return ``L_n^{(alpha)}(t)`` for ``n = 0..nmax`` stacked along axis 0.

    Uses ``(n+1) L_{n+1} = (2n+1+alpha-t) L_n - (n+alpha) L_{n-1}``.  The
    recurrence is linear, so a ``scale`` factor (e.g. ``exp(-t/2)``) can be
    folded into the start values to keep large arguments from overflowing.
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("laguerre argument must be finite")
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    s0 = np.ones(t.shape) if scale is None else np.broadcast_to(scale, t.shape)
    out = np.empty((nmax + 1,) + t.shape)
    out[0] = s0
    if nmax >= 1:
        out[1] = (1.0 + alpha - t) * s0
    for n in range(1, nmax):
        out[n + 1] = ((2 * n + 1 + alpha - t) * out[n] - (n + alpha) * out[n - 1]) / (n + 1)
    return out


def laguerre(n: int, alpha: float, t):
    """Associated Laguerre polynomial ``L_n^{(alpha)}(t)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    res = laguerre_table(n, alpha, t)[n]
    return float(res) if res.ndim == 0 else res


# --------------------------------------------------------------------------
# log Gamma
# --------------------------------------------------------------------------

# Lanczos approximation, g = 7, nine coefficients (Godfrey's set).  Relative
# accuracy of Gamma(x) is about 1e-15 for x >= 0.5.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_gamma_scalar(x: float) -> float:
    if x < 0.5:
        # reflection; only reached for 0 < x < 0.5
        return math.log(math.pi / math.sin(math.pi * x)) - _log_gamma_scalar(1.0 - x)
    if x == 1.0 or x == 2.0:
        return 0.0
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(acc)


def log_gamma(x):
    """Natural log of Gamma(x) for x > 0 (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("log_gamma requires x > 0")
    if arr.ndim == 0:
        return _log_gamma_scalar(float(arr))
    return np.array([_log_gamma_scalar(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def log_factorials(nmax: int) -> np.ndarray:
    """``log(n!)`` for n = 0..nmax."""
    return np.array([_log_gamma_scalar(n + 1.0) for n in range(nmax + 1)])


# --------------------------------------------------------------------------
# Confluent hypergeometric 1F1
# --------------------------------------------------------------------------

_RESCALE = 1e250


def _kummer(a: float, b: float, t: float, ctl: SeriesControl):
    """Sum the Kummer series; returns (mantissa, log_scale, rel_err, terms)."""
    if b <= 0 and float(b).is_integer():
        raise ValueError("b must not be a non-positive integer")
    if t < 0 or not math.isfinite(t):
        raise ValueError("t must be finite and >= 0")
    total = 1.0
    term = 1.0
    log_scale = 0.0
    if t == 0.0:
        return total, log_scale, 0.0, 1
    for m in range(ctl.max_terms):
        term *= (a + m) / (b + m) * t / (m + 1)
        total += term
        if total > _RESCALE:
            total /= _RESCALE
            term /= _RESCALE
            log_scale += math.log(_RESCALE)
        ratio = abs((a + m + 1) / (b + m + 1) * t / (m + 2))
        if ratio < 1.0:
            # remaining tail bounded by a geometric series
            tail = abs(term) * ratio / (1.0 - ratio)
            rel = tail / abs(total) if total != 0 else tail
            if rel <= ctl.rel_tol:
                return total, log_scale, rel, m + 2
    raise NonConvergence(
        f"1F1({a}; {b}; {t}) did not reach rel_tol={ctl.rel_tol} in {ctl.max_terms} terms"
    )


def hyp1f1(a: float, b: float, t: float, ctl: SeriesControl | None = None,
           full_output: bool = False):
    """Kummer's function ``1F1(a; b; t)`` for ``t >= 0`` by direct summation.

    With ``full_output`` a :class:`SeriesResult` is returned carrying the
    estimated relative truncation error and the number of terms used.
    """
    ctl = ctl or SeriesControl()
    mant, log_scale, rel, n = _kummer(a, b, t, ctl)
    value = mant * math.exp(log_scale) if log_scale else mant
    if full_output:
        return SeriesResult(value, rel, n)
    return value


def log_hyp1f1(a: float, b: float, t: float, ctl: SeriesControl | None = None) -> float:
    """``log 1F1(a; b; t)`` for positive-term series; does not overflow."""
    ctl = ctl or SeriesControl()
    mant, log_scale, _, _ = _kummer(a, b, t, ctl)
    if mant <= 0:
        raise ValueError("log_hyp1f1 needs a positive series value")
    return math.log(mant) + log_scale
