"""Operator algebra in the truncated number basis {|e_0>, ..., |e_{N-1}>}.

Operators are plain complex ``numpy`` arrays of shape ``(N, N)`` with row
index = bra and column index = ket.  Matrix elements of ``D(z)`` and of the
displaced geometric states ``D(z) r^N D(z)^dag`` are evaluated in closed form,
so every returned entry is the exact entry of the infinite-dimensional
operator; only products of truncated matrices suffer from the cut.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .quadrature import PhaseGrid
from .specfun import laguerre_table, log_factorials

__all__ = [
    "ladder",
    "number",
    "parity",
    "rotation",
    "position",
    "momentum",
    "displacement",
    "displacement_batch",
    "geometric_kernel_batch",
    "boltzmann_density",
    "interior_margin",
    "FundamentalIntegral",
    "fundamental_integral_check",
    "operator_to_json",
    "operator_from_json",
    "projector",
]


def _check_dim(dim, lo=1):
    if int(dim) != dim or dim < lo:
        raise ValidationError(f"dim must be an integer >= {lo}, got {dim}")
    return int(dim)


def ladder(dim: int):
    """Lowering and raising operators ``(a, a_dag)``."""
    dim = _check_dim(dim, 2)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return a, a.conj().T.copy()


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(_check_dim(dim), dtype=float)).astype(complex)


def parity(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def rotation(theta: float, nu: float, dim: int) -> np.ndarray:
    """``U_T(theta)``: diagonal ``exp(i (n + nu) theta)``."""
    n = np.arange(_check_dim(dim))
    return np.diag(np.exp(1j * (n + nu) * theta))


def position(dim: int) -> np.ndarray:
    """``Q = (a + a_dag)/sqrt(2)``; its entries are exact in the block."""
    a, ad = ladder(dim)
    return (a + ad) / math.sqrt(2.0)


def momentum(dim: int) -> np.ndarray:
    a, ad = ladder(dim)
    return (a - ad) / (1j * math.sqrt(2.0))


def projector(n: int, m: int, dim: int) -> np.ndarray:
    """``|e_n><e_m|``."""
    out = np.zeros((dim, dim), dtype=complex)
    out[n, m] = 1.0
    return out


def interior_margin(z_abs: float) -> int:
    """Default truncation margin ``ceil(4|z|^2) + 4``."""
    return int(math.ceil(4.0 * z_abs ** 2)) + 4


# --------------------------------------------------------------------------
# Displacement operator
# --------------------------------------------------------------------------

def _lower_displacement(z: np.ndarray, dim: int) -> np.ndarray:
    """Entries ``D_mn(z)`` for m >= n, laid out as ``(dim, dim) + z.shape``.

    ``z^(m-n)`` is built by repeated multiplication, which is exactly odd
    under ``z -> -z`` in floating point.
    """
    z = np.asarray(z, dtype=complex)
    t = z.real ** 2 + z.imag ** 2
    lf = log_factorials(dim)
    out = np.zeros((dim, dim) + z.shape, dtype=complex)
    gauss = np.exp(-0.5 * t)
    zpow = np.ones(z.shape, dtype=complex)
    for alpha in range(dim):
        if alpha:
            zpow = zpow * z
        nmax = dim - 1 - alpha
        lag = laguerre_table(nmax, float(alpha), t, scale=gauss)
        for n in range(nmax + 1):
            m = n + alpha
            ratio = math.exp(0.5 * (lf[n] - lf[m]))
            out[m, n] = ratio * (lag[n] * zpow)
    return out


def displacement_batch(z, dim: int) -> np.ndarray:
    """``D(z)`` for an array of phase points; shape ``z.shape + (dim, dim)``.

    The strict upper triangle is ``(-1)^(m-n) conj(D_nm)``, i.e. taken from
    ``D(-z)^dag``; since the lower triangle is exactly odd/even in ``z``,
    ``D(-z)`` equals ``D(z)^dag`` bit for bit.
    """
    dim = _check_dim(dim)
    z = np.asarray(z, dtype=complex)
    low = _lower_displacement(z, dim)
    m, n = np.indices((dim, dim))
    sign = np.where(n > m, (-1.0) ** (n - m), 0.0).reshape((dim, dim) + (1,) * z.ndim)
    full = low + sign * np.conj(np.swapaxes(low, 0, 1))
    return np.moveaxis(full, (0, 1), (-2, -1))


def displacement(z: complex, dim: int) -> np.ndarray:
    """Displacement operator ``D(z) = exp(z a_dag - conj(z) a)``."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValidationError("phase point must be finite")
    return displacement_batch(np.array(z), dim)


def geometric_kernel_batch(z, r: float, dim: int) -> np.ndarray:
    """``<e_m| D(z) r^N D(z)^dag |e_n>`` in closed form, batched over z.

    With ``w = 1 - r`` and ``t = |z|^2`` the entry (m >= n) is
    ``sqrt(n!/m!) e^{-w t} (w z)^{m-n} l_n`` where ``l_n = r^n L_n^{(m-n)}(-w^2 t / r)``
    is produced by the rescaled recurrence, valid also at ``r = 0``.
    The entries decay like ``exp(-(1-r)|z|^2)``.
    """
    dim = _check_dim(dim)
    z = np.asarray(z, dtype=complex)
    t = z.real ** 2 + z.imag ** 2
    w = 1.0 - r
    x = w * w * t
    lf = log_factorials(dim)
    out = np.empty((dim, dim) + z.shape, dtype=complex)
    decay = np.exp(-w * t)
    wz = w * z
    for alpha in range(dim):
        nmax = dim - 1 - alpha
        ell = np.empty((nmax + 1,) + t.shape)
        ell[0] = decay
        if nmax >= 1:
            ell[1] = ((1.0 + alpha) * r + x) * decay
        for n in range(1, nmax):
            ell[n + 1] = (((2 * n + 1 + alpha) * r + x) * ell[n]
                          - (n + alpha) * r * r * ell[n - 1]) / (n + 1)
        zpow = wz ** alpha
        for n in range(nmax + 1):
            m = n + alpha
            val = math.exp(0.5 * (lf[n] - lf[m])) * (ell[n] * zpow)
            out[m, n] = val
            if alpha:
                out[n, m] = np.conj(val)
    return np.moveaxis(out, (0, 1), (-2, -1))


# --------------------------------------------------------------------------
# Densities and fundamental integrals
# --------------------------------------------------------------------------

def boltzmann_density(s: float, dim: int) -> np.ndarray:
    """``rho_s = 2/(1-s) ((s+1)/(s-1))^N`` for ``s <= -1`` (truncated).

    With ``exp(-hbar omega / k_B T) = (s+1)/(s-1)`` this is the thermal state.
    """
    dim = _check_dim(dim)
    if not s <= -1:
        raise ValidationError("boltzmann_density needs s <= -1")
    r = (s + 1.0) / (s - 1.0)
    n = np.arange(dim)
    return np.diag(2.0 / (1.0 - s) * r ** n).astype(complex)


def cahill_glauber_diagonal(s: float, dim: int) -> np.ndarray:
    """Closed-form diagonal ``2/(1-s) ((s+1)/(s-1))^n`` of ``M_s``."""
    r = (s + 1.0) / (s - 1.0)
    return 2.0 / (1.0 - s) * r ** np.arange(dim)


@dataclass(frozen=True)
class FundamentalIntegral:
    operator: np.ndarray
    expected: np.ndarray
    max_defect: float


def fundamental_integral_check(dim: int, grid: PhaseGrid | None = None,
                               s: float = 0.0, interior: int | None = None
                               ) -> FundamentalIntegral:
    """Integrate ``exp(s|z|^2/2) D(z) d^2z/pi`` over the grid.

    ``s = 0`` gives ``2P`` and ``s = -1`` the ground-state projector; the
    result is compared with the closed form on the block ``m, n < interior``.
    """
    dim = _check_dim(dim)
    if s > 0.0:
        raise ValidationError("only s <= 0 converges in norm")
    grid = grid or PhaseGrid()
    rate = 0.5 * (1.0 - s)
    z, w = grid.rule(rate)
    op = np.zeros((dim, dim), dtype=complex)
    for sl in _chunks(len(z), dim):
        d = displacement_batch(z[sl], dim)
        weight = w[sl] * np.exp(0.5 * s * np.abs(z[sl]) ** 2)
        op += np.tensordot(weight, d, axes=(0, 0))
    expected = np.diag(cahill_glauber_diagonal(s, dim)).astype(complex)
    k = dim if interior is None else interior
    defect = float(np.max(np.abs(op - expected)[:k, :k]))
    return FundamentalIntegral(op, expected, defect)


def _chunks(n: int, dim: int, budget: int = 4_000_000):
    step = max(1, budget // (dim * dim))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def operator_to_json(op: np.ndarray, **extra) -> dict:
    """``{dim, entries}`` with row-major ``[re, im]`` pairs (bit-exact floats)."""
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValidationError("operator must be square")
    if not np.all(np.isfinite(op)):
        raise ValidationError("operator entries must be finite")
    entries = [[float(v.real), float(v.imag)] for v in op.ravel()]
    out = {"dim": int(op.shape[0]), "entries": entries}
    out.update(extra)
    return out


def operator_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    dim = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != dim * dim:
        raise ValidationError("entry count does not match dim")
    arr = np.array([complex(re, im) for re, im in entries], dtype=complex)
    return arr.reshape(dim, dim)
