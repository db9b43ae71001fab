"""Affine (wavelet) quantization on the half-line ``L^2((0, inf), dx)``.

Coherent states are ``<x|q, p> = e^{ipx} psi(x/q) / sqrt(q)`` for the
fiducial ``psi(x) = c exp(-(a/x + b x))``.  Everything lives on a uniform
grid ``x_i = i h``, ``i = 1..n``, which excludes the origin; the fiducial's
essential zero there makes the cut harmless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import (ConfigError, GridUnderresolved, InterpolationOutOfRange,
                     QuadratureUnstable, ValidationError)

__all__ = [
    "HalfLineGrid",
    "FiducialVector",
    "AffinePoint",
    "build_fiducial",
    "c_gamma",
    "kinetic_constant",
    "affine_quantize_position",
    "momentum_operator",
    "position_operator",
    "TridiagonalOperator",
    "affine_kinetic",
    "affine_cs",
    "affine_action",
    "resolution_check",
    "kinetic_path",
]

AUDIT_RTOL = 1e-6


@dataclass(frozen=True)
class HalfLineGrid:
    """Uniform grid ``x_i = i h`` on ``(0, x_max]``."""

    h: float
    x_max: float

    def __post_init__(self):
        if not (self.h > 0 and self.x_max > self.h):
            raise ConfigError("need 0 < h < x_max")
        n = self.x_max / self.h
        if abs(n - round(n)) > 1e-9 * n:
            raise ConfigError("x_max must be an integer multiple of h")

    @property
    def n(self) -> int:
        return int(round(self.x_max / self.h))

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    def refined(self) -> "HalfLineGrid":
        return HalfLineGrid(self.h / 2.0, self.x_max)


@dataclass(frozen=True)
class AffinePoint:
    q: float
    p: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValidationError("dilation q must be > 0")

    def __mul__(self, other: "AffinePoint") -> "AffinePoint":
        """``(q, p)(q0, p0) = (q q0, p0/q + p)``."""
        return AffinePoint(self.q * other.q, other.p / self.q + self.p)


@dataclass(frozen=True)
class FiducialVector:
    """Normalized samples of ``psi`` on a grid.

    With ``a, b`` set the closed form ``c exp(-(a/x + b x))`` and its
    derivative are available; otherwise samples are interpolated as a cubic
    spline in ``log psi``.
    """

    grid: HalfLineGrid
    values: np.ndarray
    norm_constant: float
    a: Optional[float] = None
    b: Optional[float] = None

    @property
    def analytic(self) -> bool:
        return self.a is not None and self.b is not None

    def exact(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0
        out[pos] = self.norm_constant * np.exp(-(self.a / x[pos] + self.b * x[pos]))
        return out

    def derivative(self, x) -> np.ndarray:
        """``psi'(x)``: ``(a/x^2 - b) psi`` in closed form, else spline slope."""
        x = np.asarray(x, dtype=float)
        if self.analytic:
            return (self.a / x ** 2 - self.b) * self.exact(x)
        vals = self.interp(x)
        spline = self._log_spline()
        return vals * spline(x, 1)

    def _log_spline(self):
        xs = self.grid.x
        keep = self.values > 1e-300
        return CubicSpline(xs[keep], np.log(self.values[keep]))

    def interp(self, x, tail_tol: float = 1e-12) -> np.ndarray:
        """Log-cubic interpolation; zero outside the sampled support.

        Points beyond the sampled range are allowed only where the samples
        have already decayed below ``tail_tol`` of the peak.
        """
        x = np.asarray(x, dtype=float)
        xs = self.grid.x
        keep = self.values > 1e-300
        lo, hi = xs[keep][0], xs[keep][-1]
        peak = float(np.max(self.values))
        below = x < xs[0]
        above = x > xs[-1]
        if np.any(below) and self.values[0] > tail_tol * peak:
            raise InterpolationOutOfRange("points below the grid where psi is not negligible")
        if np.any(above) and self.values[-1] > tail_tol * peak:
            raise InterpolationOutOfRange("points beyond x_max where psi is not negligible")
        out = np.zeros(x.shape)
        inside = (x >= lo) & (x <= hi)
        if np.any(inside):
            out[inside] = np.exp(self._log_spline()(x[inside]))
        return out

    def __call__(self, x) -> np.ndarray:
        return self.exact(x) if self.analytic else self.interp(x)


def build_fiducial(a: float, b: float, grid: HalfLineGrid, tail_tol: float = 1e-15) -> FiducialVector:
    """``psi(x) = c exp(-(a/x + b x))`` normalized by grid quadrature.

    The grid must resolve the peak at ``sqrt(a/b)`` (``h <= sqrt(a/b)/50``),
    the essential zero at the origin (``h <= a/5``) and the decay
    (``psi(x_max) <= tail_tol * max psi``).
    """
    if not (a > 0 and b > 0):
        raise ConfigError("fiducial needs a > 0 and b > 0")
    peak = math.sqrt(a / b)
    if grid.h > peak / 50.0:
        raise GridUnderresolved(f"h={grid.h:g} exceeds sqrt(a/b)/50={peak / 50:g}")
    if grid.h > a / 5.0:
        raise GridUnderresolved(f"h={grid.h:g} does not resolve the zero at the origin (a/5={a / 5:g})")
    x = grid.x
    log_raw = -(a / x + b * x)
    shift = -2.0 * math.sqrt(a * b)
    raw = np.exp(log_raw - shift)
    if raw[-1] > tail_tol * raw.max():
        raise GridUnderresolved(f"x_max={grid.x_max:g} truncates the fiducial tail")
    norm2 = float(np.sum(raw ** 2) * grid.h)
    c_scaled = 1.0 / math.sqrt(norm2)
    values = c_scaled * raw
    c = c_scaled * math.exp(-shift)
    return FiducialVector(grid, values, c, float(a), float(b))


def from_samples(grid: HalfLineGrid, values: Sequence[float]) -> FiducialVector:
    """Fiducial from user samples (normalized here)."""
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.n,) or np.any(v < 0):
        raise ValidationError("samples must be non-negative, one per grid point")
    norm = math.sqrt(float(np.sum(v ** 2) * grid.h))
    return FiducialVector(grid, v / norm, 1.0 / norm)


# --------------------------------------------------------------------------
# Moments
# --------------------------------------------------------------------------

def _audited(fn: Callable[[np.ndarray, float, np.ndarray], float], psi: FiducialVector,
             what: str) -> float:
    """Evaluate a grid sum with spacing h and re-check it at h/2 (closed-form
    fiducial) or 2h (sampled fiducial)."""
    g = psi.grid
    val = fn(g.x, g.h, psi.values)
    if psi.analytic:
        xr = g.refined().x
        other = fn(xr, g.h / 2.0, psi.exact(xr))
    else:
        other = fn(g.x[1::2], 2.0 * g.h, psi.values[1::2])
    if abs(other - val) > AUDIT_RTOL * abs(val):
        raise QuadratureUnstable(f"{what}: {val:.12g} vs {other:.12g} after changing h")
    return val


def c_gamma(psi: FiducialVector, gamma: float) -> float:
    """``c_gamma = int |psi(x)|^2 x^{-(2+gamma)} dx`` by grid quadrature."""
    return _audited(lambda x, h, v: float(np.sum(v ** 2 * x ** (-(2.0 + gamma))) * h),
                    psi, f"c_gamma({gamma:g})")


def kinetic_constant(psi: FiducialVector) -> float:
    """``K = int u psi'(u)^2 du / c_{-1}``."""
    cm1 = c_gamma(psi, -1.0)
    if psi.analytic:
        integrand = lambda x, h, v: float(np.sum(x * ((psi.a / x ** 2 - psi.b) * v) ** 2) * h)
    else:
        integrand = lambda x, h, v: float(np.sum(x * np.gradient(v, h) ** 2) * h)
    return _audited(integrand, psi, "K") / cm1


def affine_quantize_position(f: Callable[[np.ndarray], np.ndarray], psi: FiducialVector,
                             x: Optional[np.ndarray] = None) -> np.ndarray:
    """Multiplication symbol ``(1/c_{-1}) int f(x/u) |psi(u)|^2 du/u`` at ``x``.

    This is the quantization of ``f(q)`` after the momentum integral has
    been done in closed form.
    """
    g = psi.grid
    x = g.x if x is None else np.asarray(x, dtype=float)
    cm1 = c_gamma(psi, -1.0)

    def sym(u, h, v):
        w = v ** 2 / u * h
        return np.array([np.sum(f(xx / u) * w) for xx in np.atleast_1d(x)])

    coarse = sym(g.x, g.h, psi.values)
    if psi.analytic:
        xr = g.refined().x
        fine = sym(xr, g.h / 2.0, psi.exact(xr))
    else:
        fine = sym(g.x[1::2], 2.0 * g.h, psi.values[1::2])
    scale = np.maximum(np.abs(coarse), 1e-300)
    if np.any(np.abs(fine - coarse) > AUDIT_RTOL * scale):
        raise QuadratureUnstable("multiplication symbol changes when h is halved")
    return coarse / cm1


# --------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------

def position_operator(grid: HalfLineGrid):
    return sparse.diags(grid.x.astype(complex), 0, format="csr")


def momentum_operator(grid: HalfLineGrid):
    """Central-difference ``-i d/dx`` with zero closure at both ends (Hermitian)."""
    n = grid.n
    off = np.full(n - 1, 1.0 / (2.0 * grid.h))
    return sparse.diags([-1j * off, 1j * off], [1, -1], shape=(n, n), format="csr")


@dataclass(frozen=True)
class TridiagonalOperator:
    """Real symmetric tridiagonal matrix stored by its diagonals."""

    diag: np.ndarray
    off: np.ndarray

    def toarray(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def tosparse(self):
        return sparse.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def eigvalsh(self, k: Optional[int] = None) -> np.ndarray:
        """Lowest ``k`` eigenvalues (all when ``k`` is None)."""
        if k is None:
            return eigh_tridiagonal(self.diag, self.off, eigvals_only=True)
        return eigh_tridiagonal(self.diag, self.off, eigvals_only=True,
                                select="i", select_range=(0, k - 1))


def affine_kinetic(grid: HalfLineGrid, K: Optional[float] = None,
                   psi: Optional[FiducialVector] = None) -> TridiagonalOperator:
    """Three-point ``-d^2/dx^2`` (Dirichlet) plus ``K/x^2``.

    ``K`` defaults to ``kinetic_constant(psi)``.
    """
    if K is None:
        if psi is None:
            raise ConfigError("give K or a fiducial")
        K = kinetic_constant(psi)
    x = grid.x
    h2 = grid.h ** 2
    diag = 2.0 / h2 + K / x ** 2
    off = np.full(grid.n - 1, -1.0 / h2)
    return TridiagonalOperator(diag, off)


def affine_action(q: float, p: float, fn: Callable[[np.ndarray], np.ndarray]):
    """``U(q, p) fn : x -> e^{ipx} fn(x/q) / sqrt(q)``."""
    if not q > 0:
        raise ValidationError("dilation q must be > 0")
    sq = math.sqrt(q)
    return lambda x: np.exp(1j * p * np.asarray(x)) * fn(np.asarray(x) / q) / sq


def affine_cs(pt: AffinePoint, psi: FiducialVector, x: Optional[np.ndarray] = None) -> np.ndarray:
    """Samples of ``<x|q, p>`` using the log-cubic interpolant of ``psi``."""
    x = psi.grid.x if x is None else np.asarray(x, dtype=float)
    return affine_action(pt.q, pt.p, psi.interp)(x)


def resolution_check(phi: np.ndarray, psi: FiducialVector, q_bounds=(1.0 / 32, 32.0),
                     p_max: float = 40.0, nq: int = 241, dp: float = 0.05,
                     method: str = "quadrature", support_tol: float = 1e-14) -> float:
    """``int int |<phi|q,p>|^2 dq dp / (2 pi c_{-1})`` over a bounded window.

    ``method="quadrature"`` does both integrals numerically (trapezoid in
    ``log q``, uniform ``p``); ``"reduced"`` integrates ``p`` in closed form
    (Parseval), leaving ``int |phi|^2 |psi(x/q)|^2 dx dq/q``.
    """
    g = psi.grid
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (g.n,):
        raise ValidationError("phi must be sampled on the fiducial grid")
    qmin, qmax = q_bounds
    if not 0 < qmin < qmax:
        raise ConfigError("need 0 < q_min < q_max")
    p_max = min(p_max, math.pi / g.h)
    cm1 = c_gamma(psi, -1.0)
    keep = np.abs(phi) > support_tol * np.max(np.abs(phi))
    x = g.x[keep]
    ph = phi[keep]
    s = np.linspace(math.log(qmin), math.log(qmax), nq)
    ws = np.full(nq, s[1] - s[0])
    ws[[0, -1]] *= 0.5
    qs = np.exp(s)
    total = 0.0
    if method == "reduced":
        for q, w in zip(qs, ws):
            vals = np.abs(ph) ** 2 * psi(x / q) ** 2 / q
            total += w * q * float(np.sum(vals) * g.h)
        return total / cm1
    if method != "quadrature":
        raise ConfigError("method must be 'quadrature' or 'reduced'")
    npts = int(round(2 * p_max / dp)) + 1
    p = np.linspace(-p_max, p_max, npts)
    wp = np.full(npts, p[1] - p[0])
    wp[[0, -1]] *= 0.5
    phase = np.exp(1j * np.outer(p, x))
    for q, w in zip(qs, ws):
        gq = np.conj(ph) * psi(x / q) / math.sqrt(q)
        amp = (phase @ gq) * g.h
        total += w * q * float(np.sum(wp * np.abs(amp) ** 2))
    return total / (2.0 * math.pi * cm1)


def kinetic_path(lams: Sequence[float], tail: float = 40.0):
    """``K`` along ``a = b = lambda``: rows ``(lambda, K_grid)``.

    Only ``sqrt(ab)`` matters by dilation invariance; the grid is sized per
    point so the zero at the origin and the ``exp(-2 b x)`` tail are resolved.
    """
    rows = []
    for lam in lams:
        a = b = float(lam)
        h = min(math.sqrt(a / b) / 50.0, a / 20.0)
        x_max = math.ceil((tail + 2.0 * lam) / b / h) * h
        psi = build_fiducial(a, b, HalfLineGrid(h, x_max))
        rows.append((float(lam), kinetic_constant(psi)))
    return rows
