"""The quantization map ``f -> A_f`` and its duals.

``A_f = int f(z) D(z) M D(z)^dag d^2z/pi`` with ``M`` generated by a weight.
Three evaluation routes are used:

* kernel: when ``M = (1 - r) r^N`` (Cahill-Glauber, constant weight) the
  displaced operator ``M(z)`` has closed-form entries decaying like
  ``exp(-(1 - r)|z|^2)`` and the integral is a polar Gauss-Laguerre sum;
* Fourier: ``A_f = int varpi(xi) fhat(-xi) D(xi) d^2xi/pi``.  For polynomial
  ``f`` this collapses to derivatives of ``varpi D`` at the origin (exact),
  for Gaussians ``fhat`` is closed form, and for functions of ``q`` alone the
  integral is one-dimensional;
* otherwise ``fhat`` is obtained by quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import (ConfigError, GridTooCoarse, MissingDerivatives, NotDensity,
                     RankCapExceeded, UnsupportedProbe, ValidationError)
from .fock import (_check_dim, _chunks, displacement, displacement_batch,
                   geometric_kernel_batch, ladder, momentum, position)
from .quadrature import PhaseGrid, gauss_legendre
from .weights import WeightFunction, _check_supported, constant, from_spec

__all__ = [
    "PhaseFunction",
    "polynomial",
    "gaussian",
    "of_q",
    "builtin",
    "quantize",
    "OscillatorForms",
    "quantize_oscillator",
    "lower_symbol",
    "symplectic_fourier",
    "wigner_of_operator",
    "dual_symbol",
    "duality_pairing",
    "DeltaCombo",
    "quantize_delta",
    "dequantize_rank_one",
    "star_product",
]

SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# Phase-space functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseFunction:
    """A classical observable with optional structure.

    ``poly`` is a tuple of ``((j, k), c)`` for ``sum c z^j zbar^k``;
    ``gauss`` a tuple of ``(amp, kappa, z0)`` for
    ``sum amp exp(-kappa |z - z0|^2)``; ``qprofile`` a function ``g`` with
    ``f(z) = g(q)``.  ``eta`` bounds the growth, ``|f| <~ exp(eta |z|^2)``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    growth: str = "bounded"
    degree: Optional[int] = None
    eta: float = 0.0
    poly: Optional[tuple] = None
    gauss: Optional[tuple] = None
    qprofile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    qtransform: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    name: str = "f"

    def __post_init__(self):
        if self.growth not in ("polynomial", "bounded", "gaussian_subcritical"):
            raise ConfigError(f"unknown growth tag {self.growth!r}")
        if self.growth == "gaussian_subcritical" and not self.eta < 1.0:
            raise ConfigError("gaussian_subcritical growth needs eta < 1")

    def __call__(self, z):
        return np.asarray(self.eval(np.asarray(z, dtype=complex)), dtype=complex)

    def translated(self, z0: complex) -> "PhaseFunction":
        """``z -> f(z - z0)``."""
        z0 = complex(z0)
        poly = gauss = qp = None
        if self.poly is not None:
            acc: Dict[Tuple[int, int], complex] = {}
            for (j, k), c in self.poly:
                for a in range(j + 1):
                    for b in range(k + 1):
                        coef = (c * math.comb(j, a) * math.comb(k, b)
                                * (-z0) ** (j - a) * (-z0.conjugate()) ** (k - b))
                        acc[(a, b)] = acc.get((a, b), 0.0) + coef
            poly = _poly_tuple(acc)
        if self.gauss is not None:
            gauss = tuple((amp, kap, c + z0) for amp, kap, c in self.gauss)
        if self.qprofile is not None:
            q0 = SQRT2 * z0.real
            g = self.qprofile
            qp = lambda q: g(np.asarray(q) - q0)
        f = self.eval
        return PhaseFunction(lambda z: f(z - z0), self.growth, self.degree, self.eta,
                             poly, gauss, qp, None, f"{self.name}(z-{z0:g})")

    def rotated(self, theta: float) -> "PhaseFunction":
        """``T(theta) f : z -> f(exp(-i theta) z)``."""
        ph = np.exp(-1j * theta)
        poly = gauss = None
        if self.poly is not None:
            poly = tuple(((j, k), c * ph ** (j - k)) for (j, k), c in self.poly)
        if self.gauss is not None:
            gauss = tuple((amp, kap, c / ph) for amp, kap, c in self.gauss)
        f = self.eval
        return PhaseFunction(lambda z: f(ph * z), self.growth, self.degree, self.eta,
                             poly, gauss, None, None, f"T({theta:g}){self.name}")

    def reflected(self) -> "PhaseFunction":
        """``z -> f(-z)``."""
        poly = gauss = qp = None
        if self.poly is not None:
            poly = tuple(((j, k), c * (-1) ** (j + k)) for (j, k), c in self.poly)
        if self.gauss is not None:
            gauss = tuple((amp, kap, -c) for amp, kap, c in self.gauss)
        if self.qprofile is not None:
            g = self.qprofile
            qp = lambda q: g(-np.asarray(q))
        f = self.eval
        return PhaseFunction(lambda z: f(-z), self.growth, self.degree, self.eta,
                             poly, gauss, qp, None, f"{self.name}(-z)")

    def conj(self) -> "PhaseFunction":
        poly = gauss = qp = None
        if self.poly is not None:
            poly = _poly_tuple({(k, j): np.conj(c) for (j, k), c in self.poly})
        if self.gauss is not None:
            gauss = tuple((np.conj(amp), kap, c) for amp, kap, c in self.gauss)
        if self.qprofile is not None:
            g = self.qprofile
            qp = lambda q: np.conj(g(q))
        f = self.eval
        return PhaseFunction(lambda z: np.conj(f(z)), self.growth, self.degree, self.eta,
                             poly, gauss, qp, None, f"conj({self.name})")


def _poly_tuple(coeffs: dict) -> tuple:
    return tuple(sorted(((jk, complex(c)) for jk, c in coeffs.items() if c != 0),
                        key=lambda item: item[0]))


def polynomial(coeffs, name: str = "poly") -> PhaseFunction:
    """``sum c z^j zbar^k`` from ``{(j, k): c}``."""
    coeffs = {(int(j), int(k)): complex(c) for (j, k), c in dict(coeffs).items()}
    if any(j < 0 or k < 0 for j, k in coeffs):
        raise ConfigError("polynomial exponents must be >= 0")
    poly = _poly_tuple(coeffs)
    deg = max((j + k for (j, k), _ in poly), default=0)

    def ev(z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        zb = np.conj(z)
        for (j, k), c in poly:
            out = out + c * z ** j * zb ** k
        return out

    return PhaseFunction(ev, "polynomial", deg, 0.0, poly, name=name)


def gaussian(amp: complex = 1.0, kappa: float = 1.0, center: complex = 0.0,
             name: str = "gaussian") -> PhaseFunction:
    """``amp exp(-kappa |z - center|^2)``."""
    if not kappa > 0:
        raise ConfigError("gaussian needs kappa > 0")
    amp, center = complex(amp), complex(center)
    ev = lambda z: amp * np.exp(-kappa * np.abs(np.asarray(z) - center) ** 2)
    return PhaseFunction(ev, "bounded", None, -float(kappa),
                         gauss=((amp, float(kappa), center),), name=name)


def of_q(g: Callable, transform: Optional[Callable] = None, growth: str = "bounded",
         name: str = "g(q)") -> PhaseFunction:
    """``f(z) = g(q)`` with ``q = sqrt(2) Re z``.

    ``transform(y) = int exp(i y q) g(q) dq`` may be supplied; otherwise it
    is computed by quadrature, which requires ``g`` to decay.
    """
    ev = lambda z: g(SQRT2 * np.real(z)) + 0j
    return PhaseFunction(ev, growth, None, 0.0, qprofile=g, qtransform=transform, name=name)


def builtin(name: str) -> PhaseFunction:
    """Named observables: one, z, zbar, q, p, q2, p2, zzbar, gaussian(sigma)."""
    name = name.strip()
    r = 1.0 / SQRT2
    table = {
        "one": {(0, 0): 1.0},
        "z": {(1, 0): 1.0},
        "zbar": {(0, 1): 1.0},
        "q": {(1, 0): r, (0, 1): r},
        "p": {(1, 0): -1j * r, (0, 1): 1j * r},
        "q2": {(2, 0): 0.5, (1, 1): 1.0, (0, 2): 0.5},
        "p2": {(2, 0): -0.5, (1, 1): 1.0, (0, 2): -0.5},
        "zzbar": {(1, 1): 1.0},
        "zz̄": {(1, 1): 1.0},
    }
    if name in table:
        f = polynomial(table[name], name=name)
        if name in ("q", "q2"):
            power = 1 if name == "q" else 2
            return PhaseFunction(f.eval, f.growth, f.degree, 0.0, f.poly,
                                 qprofile=lambda q, k=power: np.asarray(q) ** k, name=name)
        return f
    if name.startswith("gaussian(") and name.endswith(")"):
        try:
            sigma = float(name[len("gaussian("):-1])
        except ValueError as exc:
            raise ConfigError(f"bad gaussian width in {name!r}") from exc
        if not sigma > 0:
            raise ConfigError("gaussian width must be positive")
        return gaussian(1.0, 1.0 / sigma ** 2, 0.0, name=name)
    raise ConfigError(f"unknown phase function {name!r}")


# --------------------------------------------------------------------------
# Closed-form pieces
# --------------------------------------------------------------------------

def _d_derivative(a: int, b: int, dim: int) -> np.ndarray:
    """``d_zbar^a d_z^b D(z)`` at ``z = 0`` (normal ordered, exact in the block)."""
    lo, hi = ladder(max(dim, 2))
    lo, hi = lo[:dim, :dim], hi[:dim, :dim]
    out = np.zeros((dim, dim), dtype=complex)
    pw_hi = [np.eye(dim, dtype=complex)]
    pw_lo = [np.eye(dim, dtype=complex)]
    for _ in range(max(a, b)):
        pw_hi.append(pw_hi[-1] @ hi)
        pw_lo.append(pw_lo[-1] @ (-lo))
    for c in range(min(a, b) + 1):
        coef = (math.factorial(a) * math.factorial(b) * (-0.5) ** c
                / (math.factorial(c) * math.factorial(b - c) * math.factorial(a - c)))
        out += coef * (pw_hi[b - c] @ pw_lo[a - c])
    return out


def _jet_monomial(w: WeightFunction, j: int, k: int, dim: int, cache: dict) -> np.ndarray:
    """``A_{z^j zbar^k} = (-1)^j d_zbar^j d_z^k (varpi D)`` at 0."""
    out = np.zeros((dim, dim), dtype=complex)
    for p1 in range(j + 1):
        for q1 in range(k + 1):
            wv = w.derivative(p1, q1)
            if wv == 0:
                continue
            key = (j - p1, k - q1)
            if key not in cache:
                cache[key] = _d_derivative(key[0], key[1], dim)
            out += math.comb(j, p1) * math.comb(k, q1) * wv * cache[key]
    return (-1) ** j * out


def _quantize_poly_jet(poly, w: WeightFunction, dim: int) -> np.ndarray:
    cache: dict = {}
    out = np.zeros((dim, dim), dtype=complex)
    for (j, k), c in poly:
        out += c * _jet_monomial(w, j, k, dim, cache)
    return out


@dataclass(frozen=True)
class OscillatorForms:
    zzbar: np.ndarray
    q2: np.ndarray
    p2: np.ndarray
    E0: float
    Em: float


def quantize_oscillator(w: WeightFunction, dim: int) -> OscillatorForms:
    """Closed forms of ``A_{|z|^2}``, ``A_{q^2}``, ``A_{p^2}`` from derivatives at 0.

    ``E0`` is the lowest eigenvalue of ``A_{|z|^2}``; ``Em`` the mean of the
    spectral infima of ``A_{q^2}`` and ``A_{p^2}``, which are the constant
    shifts relative to ``Q^2`` and ``P^2`` when the weight is regular.
    """
    dim = _check_dim(dim, 2)
    if w.deriv0 is None and w.jet is None:
        raise MissingDerivatives(f"{w.label}: deriv0 is required (use with_deriv0())")
    w0 = w.derivative(0, 0)
    dz = w.derivative(0, 1)
    dzb = w.derivative(1, 0)
    lap = w.derivative(1, 1)
    dz2 = w.derivative(0, 2)
    dzb2 = w.derivative(2, 0)
    a, ad = ladder(dim)
    eye = np.eye(dim)
    num = np.diag(np.arange(dim)).astype(complex)
    zz = w0 * num + dz * a - dzb * ad + (0.5 * w0 - lap) * eye
    az2 = w0 * (a @ a) - 2 * dzb * a + dzb2 * eye
    azb2 = w0 * (ad @ ad) + 2 * dz * ad + dz2 * eye
    q2 = 0.5 * (az2 + 2 * zz + azb2)
    p2 = -0.5 * (az2 - 2 * zz + azb2)
    E0 = float(np.linalg.eigvalsh(0.5 * (zz + zz.conj().T))[0])
    Q, P = position(dim), momentum(dim)
    Q2 = Q @ Q
    P2 = P @ P
    k = dim - 2
    shift_q = np.mean(np.diag(q2 - Q2)[:k]).real
    shift_p = np.mean(np.diag(p2 - P2)[:k]).real
    return OscillatorForms(zz, q2, p2, E0, 0.5 * (shift_q + shift_p))


# --------------------------------------------------------------------------
# quantize
# --------------------------------------------------------------------------

def _as_weight(w) -> WeightFunction:
    return w if isinstance(w, WeightFunction) else from_spec(w)


def _kernel_integral(values_fn, r: float, dim: int, grid: PhaseGrid, rate: float) -> np.ndarray:
    z, wt = grid.rule(rate)
    out = np.zeros((dim, dim), dtype=complex)
    scale = 1.0 - r
    for sl in _chunks(len(z), dim):
        k = geometric_kernel_batch(z[sl], r, dim)
        out += np.tensordot(wt[sl] * values_fn(z[sl]), k, axes=(0, 0))
    return scale * out


def _fourier_integral(fhat_neg, w: WeightFunction, dim: int, grid: PhaseGrid,
                      rate: float) -> np.ndarray:
    """``int varpi(xi) fhat(-xi) D(xi) d^2xi/pi`` on the polar rule."""
    z, wt = grid.rule(rate, breaks=w.breaks)
    out = np.zeros((dim, dim), dtype=complex)
    for sl in _chunks(len(z), dim):
        vals = wt[sl] * w(z[sl]) * fhat_neg(z[sl])
        out += np.tensordot(vals, displacement_batch(z[sl], dim), axes=(0, 0))
    return out


def _gauss_fhat_neg(gauss):
    """``fhat(-xi)`` for a sum of Gaussians."""
    def fn(xi):
        out = np.zeros(np.shape(xi), dtype=complex)
        for amp, kap, c in gauss:
            out = out + (amp / kap) * np.exp(-xi * np.conj(c) + np.conj(xi) * c
                                             - np.abs(xi) ** 2 / kap)
        return out
    return fn


def _weyl_gauss_closed(kappa: float, dim: int) -> np.ndarray:
    n = np.arange(dim)
    return np.diag(2.0 / (2.0 + kappa) * ((2.0 - kappa) / (2.0 + kappa)) ** n).astype(complex)


def _audit(ok: bool, msg: str):
    if not ok:
        raise GridTooCoarse(msg)


def _q_integral(f: PhaseFunction, w: WeightFunction, dim: int, panels: int = 20):
    """``(1/2pi) int Gt(-y) varpi(i y/sqrt2) D(i y/sqrt2) dy``, ``Gt(y) = int e^{iyq} g``."""
    ymax = 2.0 * math.sqrt(dim) + 16.0
    cuts = [0.0, ymax]
    if w.breaks is not None:
        tb = w.breaks(0.5 * math.pi)
        if tb is not None and 0 < tb and math.sqrt(2 * tb) < ymax:
            cuts.insert(1, math.sqrt(2 * tb))
    edges = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(math.ceil(hi - lo)))
        edges.extend(np.linspace(lo, hi, m + 1)[:-1])
    edges.append(ymax)
    x, wx = gauss_legendre(panels)
    ys, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        ys.append(0.5 * (hi - lo) * (x + 1) + lo)
        ws.append(0.5 * (hi - lo) * wx)
    y = np.concatenate(ys)
    wy = np.concatenate(ws)
    y = np.concatenate([-y[::-1], y])
    wy = np.concatenate([wy[::-1], wy])
    if f.qtransform is not None:
        gt = np.asarray(f.qtransform(-y), dtype=complex)
    else:
        gt = _numeric_q_transform(f.qprofile, -y)
    xi = 1j * y / SQRT2
    vals = wy * gt * w(xi) / (2 * math.pi)
    out = np.zeros((dim, dim), dtype=complex)
    for sl in _chunks(len(y), dim):
        out += np.tensordot(vals[sl], displacement_batch(xi[sl], dim), axes=(0, 0))
    return out


def _numeric_q_transform(g, y, qmax: float = 40.0, n: int = 8001):
    q = np.linspace(-qmax, qmax, n)
    gv = np.asarray(g(q), dtype=complex)
    if abs(gv[0]) > 1e-14 or abs(gv[-1]) > 1e-14:
        raise ValidationError("g(q) must decay to use the q-profile route")
    h = q[1] - q[0]
    return np.array([h * np.sum(np.exp(1j * yy * q) * gv) for yy in np.atleast_1d(y)])


def quantize(f: PhaseFunction, w, dim: int, grid: Optional[PhaseGrid] = None,
             method: str = "auto", audit: bool = True) -> np.ndarray:
    """``A_f`` in the truncated basis.

    ``method``: ``"kernel"`` (weights with ``M = (1-r) r^N``), ``"fourier"``
    (any weight; polynomial, Gaussian, q-profile or decaying ``f``), or
    ``"auto"``.  With ``audit`` the same rule is first applied to a test
    function with a known quantization, and :class:`GridTooCoarse` is raised
    if it is not reproduced.
    """
    w = _as_weight(w)
    _check_supported(w)
    dim = _check_dim(dim)
    grid = grid or PhaseGrid()
    if f.growth == "gaussian_subcritical" and w.geometric_r is None:
        raise UnsupportedProbe("exponentially growing f needs a kernel weight")
    if method == "auto":
        method = "kernel" if w.geometric_r is not None else "fourier"
    if method == "kernel":
        if w.geometric_r is None:
            raise ConfigError(f"{w.label} has no closed-form kernel")
        r = w.geometric_r
        rate = (1.0 - r) - f.eta
        if not rate > 0:
            raise UnsupportedProbe(f"{f.name} grows too fast for {w.label}")
        if audit:
            got = _kernel_integral(lambda z: np.abs(z) ** 2 + 0j, r, dim, grid, 1.0 - r)
            want = quantize_oscillator(w, max(dim, 2)).zzbar[:dim, :dim]
            err = float(np.max(np.abs(got - want)))
            _audit(err <= 1e-8 * max(1.0, dim),
                   f"kernel rule R={grid.R}, A={grid.A} misses A_(z zbar) by {err:.3g} at dim={dim}")
        return _kernel_integral(f, r, dim, grid, rate)
    if method != "fourier":
        raise ConfigError(f"unknown method {method!r}")
    if f.poly is not None:
        return _quantize_poly_jet(f.poly, w, dim)
    if f.gauss is not None:
        kap_min = min(k for _, k, _ in f.gauss)
        rate = 0.5 + 1.0 / kap_min
        if audit:
            kap = f.gauss[0][1]
            got = _fourier_integral(_gauss_fhat_neg(((1.0, kap, 0j),)), constant(), dim, grid, rate)
            got_b = _fourier_integral(_gauss_fhat_neg(((1.0, kap, 0j),)),
                                      _with_breaks_of(w), dim, grid, rate)
            want = _weyl_gauss_closed(kap, dim)
            err = max(float(np.max(np.abs(got - want))), float(np.max(np.abs(got_b - want))))
            _audit(err <= 1e-9, f"polar rule R={grid.R}, A={grid.A} misses the Gaussian audit by {err:.3g}")
        return _fourier_integral(_gauss_fhat_neg(f.gauss), w, dim, grid, rate)
    if f.qprofile is not None:
        return _q_integral(f, w, dim)
    if f.eta < 0:
        rate_f = -f.eta
        rate = 0.5 + 1.0 / rate_f
        zf, wf = grid.rule(rate_f)
        fv = f(zf) * wf

        def fhat_neg(xi):
            ph = np.exp(np.outer(-xi, np.conj(zf)) + np.outer(np.conj(xi), zf))
            return ph @ fv
        return _fourier_integral(fhat_neg, w, dim, grid, rate)
    raise UnsupportedProbe(
        f"{f.name}: no quantization route for {w.label} (needs polynomial, Gaussian, "
        "q-profile or decaying f)")


def _with_breaks_of(w: WeightFunction) -> WeightFunction:
    c = constant()
    return WeightFunction(c.eval, c.kind, c.deriv0, "constant", 1.0, c.profile, w.breaks)


# --------------------------------------------------------------------------
# Lower symbols, Fourier transform, Wigner functions
# --------------------------------------------------------------------------

def _check_density(rho: np.ndarray, tol: float = 1e-9):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotDensity("density must be a square matrix")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise NotDensity("density is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise NotDensity(f"trace {np.trace(rho).real:.12g} differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -tol:
        raise NotDensity("density has a negative eigenvalue")
    return rho


def lower_symbol(A: np.ndarray, rho: np.ndarray, z, margin: Optional[int] = None):
    """``tr(D(z) rho D(z)^dag A)``; batched over ``z``.

    ``D(z)`` is built in an enlarged basis so that the displaced density is
    exact on the block where ``A`` lives.
    """
    A = np.asarray(A, dtype=complex)
    rho = _check_density(rho)
    dim = A.shape[0]
    k = rho.shape[0]
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if margin is None:
        margin = 8 + int(math.ceil(4 * np.max(np.abs(zz)) ** 2)) if zz.size else 8
    big = max(dim, k) + margin
    out = np.empty(zz.shape, dtype=complex)
    flat = zz.ravel()
    res = np.empty(flat.shape, dtype=complex)
    for sl in _chunks(len(flat), big):
        d = displacement_batch(flat[sl], big)[:, :dim, :k]
        rz = d @ rho @ np.conj(np.swapaxes(d, -1, -2))
        res[sl] = np.einsum("kmn,nm->k", rz, A)
    out = res.reshape(zz.shape)
    return complex(out[0]) if np.ndim(z) == 0 else out


def symplectic_fourier(f, z, grid: Optional[PhaseGrid] = None, rate: float = 1.0):
    """``fhat(z) = int exp(z conj(xi) - conj(z) xi) f(xi) d^2xi/pi`` by quadrature.

    ``f`` is a callable or an array of samples at ``grid.rule(rate)`` nodes;
    ``rate`` should match the decay of ``f``.  The phase ``2 Im(z conj(xi))``
    must be resolved by the rule, so results are reliable for ``|z|`` well
    inside the rule's radius; to transform twice, sample the first result on
    a rule of smaller ``R``.
    """
    grid = grid or PhaseGrid()
    xi, wt = grid.rule(rate)
    fv = np.asarray(f(xi) if callable(f) else f, dtype=complex)
    if fv.shape != xi.shape:
        raise ValidationError("samples do not match the grid nodes")
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    out = np.empty(zz.shape, dtype=complex)
    fw = fv * wt
    step = max(1, 2_000_000 // len(xi))
    for s in range(0, len(zz), step):
        blk = zz[s:s + step]
        ph = np.exp(np.outer(blk, np.conj(xi)) - np.outer(np.conj(blk), xi))
        out[s:s + step] = ph @ fw
    return complex(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def _euler_alternating(b: np.ndarray, tol: float = 1e-15) -> complex:
    """``sum (-1)^n b_n`` through the Euler transform ``sum (-1)^k Delta^k b_0 / 2^{k+1}``."""
    total = 0.0 + 0.0j
    d = np.asarray(b, dtype=complex)
    scale = float(np.max(np.abs(d))) or 1.0
    quiet = 0
    for k in range(len(d)):
        term = (-1) ** k * d[0] / 2.0 ** (k + 1)
        total += term
        quiet = quiet + 1 if abs(term) <= tol * scale else 0
        if quiet >= 3:
            break
        d = np.diff(d)
        if d.size == 0:
            break
    return total


def wigner_of_operator(A: np.ndarray, z, summation: str = "auto", terms: Optional[int] = None):
    """``W_A(z) = tr(D(z) 2P D(z)^dag A) = 2 sum (-1)^n <e_n|D^dag A D|e_n>``.

    ``summation="direct"`` treats ``A`` as zero outside its block (right for
    operators of low rank) and sums over an enlarged basis; ``"euler"`` uses the first ``terms`` diagonal
    entries only, which is exact whenever they are polynomial in ``n`` and
    so also serves truncated unbounded operators such as polynomial ``A_f``.
    ``"auto"`` picks direct summation when the last four levels of ``A`` vanish.
    """
    A = np.asarray(A, dtype=complex)
    dim = A.shape[0]
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if summation == "auto":
        edge = max(np.max(np.abs(A[-4:, :])), np.max(np.abs(A[:, -4:])))
        summation = "direct" if edge <= 1e-14 * max(np.max(np.abs(A)), 1e-300) else "euler"
    if summation not in ("direct", "euler"):
        raise ConfigError("summation must be 'auto', 'direct' or 'euler'")
    big = dim
    if summation == "direct":
        # D(z)|e_n> reaches back into the block of A from levels n >= dim
        zmax = float(np.max(np.abs(zz))) if zz.size else 0.0
        big = dim + 10 + int(math.ceil(4 * zmax ** 2 + 4 * zmax * math.sqrt(dim)))
    if terms is None:
        terms = big if summation == "direct" else max(2, min(dim, 64) // 2)
    out = np.empty(zz.shape, dtype=complex)
    for sl in _chunks(len(zz), big):
        d = displacement_batch(zz[sl], big)[:, :dim, :terms]
        b = np.einsum("kmn,mp,kpn->kn", np.conj(d), A, d)
        for i, row in enumerate(b):
            if summation == "direct":
                out[sl.start + i] = 2.0 * np.sum(row * (-1.0) ** np.arange(terms))
            else:
                out[sl.start + i] = 2.0 * _euler_alternating(row)
    return complex(out[0]) if np.ndim(z) == 0 else out.reshape(np.shape(z))


def dual_symbol(A: np.ndarray, w, z) -> np.ndarray:
    """``tr(M(z) A)`` with ``M(z) = D(z) M D(z)^dag``; weights with a kernel only."""
    w = _as_weight(w)
    if w.geometric_r is None:
        raise UnsupportedProbe(f"{w.label}: dual symbol needs a closed-form kernel")
    A = np.asarray(A, dtype=complex)
    dim = A.shape[0]
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    out = np.empty(zz.shape, dtype=complex)
    r = w.geometric_r
    for sl in _chunks(len(zz), dim):
        k = geometric_kernel_batch(zz[sl], r, dim)
        out[sl] = (1.0 - r) * np.einsum("kmn,nm->k", k, A)
    return out.reshape(np.shape(z))


def duality_pairing(A: np.ndarray, f: PhaseFunction, w, grid: Optional[PhaseGrid] = None,
                    left_grid: Optional[PhaseGrid] = None):
    """``(int tr(M(z) A) f(z) d^2z/pi, tr(A A_f))`` from two separate quadratures."""
    w = _as_weight(w)
    A = np.asarray(A, dtype=complex)
    grid = grid or PhaseGrid()
    left_grid = left_grid or PhaseGrid(grid.R + 16, grid.A + 32)
    r = -1.0 if w.geometric_r is None else w.geometric_r
    rate = (1.0 - r) - f.eta
    z, wt = left_grid.rule(rate)
    left = complex(np.sum(wt * dual_symbol(A, w, z) * f(z)))
    right = complex(np.trace(A @ quantize(f, w, A.shape[0], grid)))
    return left, right


# --------------------------------------------------------------------------
# Distributions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaCombo:
    """``sum c * pi d_z^r d_zbar^s delta`` stored as ``{(r, s): c}``.

    The factor ``pi`` makes ``{(0, 0): 1}`` quantize to the density itself.
    Coefficients may be Python numbers or exact ``sympy`` expressions.
    """

    terms: tuple = ()

    @classmethod
    def from_dict(cls, d) -> "DeltaCombo":
        items = [((int(r), int(s)), c) for (r, s), c in dict(d).items() if c != 0]
        if any(r < 0 or s < 0 for (r, s), _ in items):
            raise ValidationError("derivative orders must be >= 0")
        return cls(tuple(sorted(items, key=lambda it: it[0])))

    @classmethod
    def from_list(cls, rows) -> "DeltaCombo":
        """From ``[(coeff, r, s), ...]``; repeated ``(r, s)`` pairs are an error."""
        d = {}
        for c, r, s in rows:
            key = (int(r), int(s))
            if key in d:
                raise ValidationError(f"duplicate term {key}")
            d[key] = c
        return cls.from_dict(d)

    @classmethod
    def from_json(cls, rows) -> "DeltaCombo":
        return cls.from_list([(complex(re, im), r, s) for re, im, r, s in rows])

    def as_dict(self) -> dict:
        return dict(self.terms)

    def to_json(self) -> list:
        return [[float(complex(c).real), float(complex(c).imag), r, s]
                for (r, s), c in self.terms]

    def __add__(self, other: "DeltaCombo") -> "DeltaCombo":
        d = self.as_dict()
        for k, c in other.terms:
            d[k] = d.get(k, 0) + c
        return DeltaCombo.from_dict(d)

    def scale(self, c) -> "DeltaCombo":
        return DeltaCombo.from_dict({k: c * v for k, v in self.terms})

    def __len__(self):
        return len(self.terms)


def _cs_delta_entries(n: int, nn: int, exact: bool):
    """Entries of ``A_{pi d^n dbar^n' delta}`` for coherent states: ``{(row, col): value}``."""
    out = {}
    if exact:
        import sympy as sp
        for p in range(min(n, nn) + 1):
            a, b = n - p, nn - p
            out[(a, b)] = (sp.Integer(-1) ** (n + nn + p) * sp.factorial(n) * sp.factorial(nn)
                           / (sp.factorial(p) * sp.sqrt(sp.factorial(a) * sp.factorial(b))))
    else:
        for p in range(min(n, nn) + 1):
            a, b = n - p, nn - p
            out[(a, b)] = ((-1) ** (n + nn + p) * math.exp(
                math.lgamma(n + 1) + math.lgamma(nn + 1) - math.lgamma(p + 1)
                - 0.5 * (math.lgamma(a + 1) + math.lgamma(b + 1))))
    return out


def quantize_delta(combo: DeltaCombo, dim: int, rho: Optional[np.ndarray] = None,
                   center: complex = 0.0, exact: bool = False):
    """Quantize a finite combination of derivatives of ``pi delta``.

    Without ``rho`` the coherent-state closed form is used (``exact=True``
    returns a ``sympy.Matrix``).  A general density supports only the plain
    ``pi delta_{center}`` term, giving ``D(center) rho D(center)^dag``.
    """
    dim = _check_dim(dim)
    if rho is not None:
        rho = _check_density(rho)
        if any(k != (0, 0) for k, _ in combo.terms):
            raise UnsupportedProbe("derivative terms need the coherent-state density")
        c = complex(combo.as_dict().get((0, 0), 0.0))
        k = rho.shape[0]
        big = max(dim, k) + 8 + int(math.ceil(4 * abs(center) ** 2))
        d = displacement(center, big)[:dim, :k]
        return c * (d @ rho @ d.conj().T)
    if center != 0:
        raise UnsupportedProbe("the coherent-state closed form is centred at the origin")
    if exact:
        import sympy as sp
        out = sp.zeros(dim, dim)
    else:
        out = np.zeros((dim, dim), dtype=complex)
    for (n, nn), c in combo.terms:
        for (a, b), v in _cs_delta_entries(n, nn, exact).items():
            if a < dim and b < dim:
                out[a, b] += c * v
    return out


def dequantize_rank_one(n: int, nn: int, exact: bool = False) -> DeltaCombo:
    """Upper symbol ``T_{n,n'}`` of ``|e_n><e_n'|`` as derivatives of ``pi delta``."""
    if n < 0 or nn < 0:
        raise ValidationError("indices must be >= 0")
    d = {}
    for p in range(min(n, nn) + 1):
        if exact:
            import sympy as sp
            c = (sp.Integer(-1) ** (n + nn) * sp.sqrt(sp.factorial(n) * sp.factorial(nn))
                 / (sp.factorial(p) * sp.factorial(n - p) * sp.factorial(nn - p)))
        else:
            c = (-1) ** (n + nn) * math.exp(
                0.5 * (math.lgamma(n + 1) + math.lgamma(nn + 1))
                - math.lgamma(p + 1) - math.lgamma(n - p + 1) - math.lgamma(nn - p + 1))
        d[(n - p, nn - p)] = c
    return DeltaCombo.from_dict(d)


def star_product(A: np.ndarray, B: np.ndarray, rank_cap: int, tol: float = 1e-12,
                 exact: bool = False) -> DeltaCombo:
    """Upper symbol of ``A B`` as ``sum <e_n|AB|e_n'> T_{n,n'}`` over ``n, n' < rank_cap``."""
    AB = np.asarray(A, dtype=complex) @ np.asarray(B, dtype=complex)
    big = np.argwhere(np.abs(AB) > tol)
    if big.size and big.max() >= rank_cap:
        raise RankCapExceeded(
            f"A B has support up to level {int(big.max())}; rank_cap={rank_cap}")
    total = DeltaCombo()
    for n, nn in big:
        total = total + dequantize_rank_one(int(n), int(nn), exact).scale(complex(AB[n, nn]))
    return total

