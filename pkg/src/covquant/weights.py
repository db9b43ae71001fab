"""Weight functions on phase space and the operator ``M`` they generate.

A weight ``varpi(z)`` with ``varpi(0) = 1`` defines
``M = int varpi(z) D(z) d^2z/pi``; the displaced family ``D(z) M D(z)^dag``
resolves the identity.  Builtin families:

* ``cahill_glauber(s)``: ``exp(s|z|^2/2)``; ``s = -1`` is coherent-state
  (anti-normal) quantization and ``s = 0`` Weyl.
* ``isometric_elliptic(alpha)``: ``2 theta(1 - alpha|z|^2) - 1``.
* ``isometric_hyperbolic(alpha)``: ``2 theta(1 - alpha Im z^2) - 1``.
* ``constant()``: ``1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, MissingDerivatives, NonAbsolutelyConvergent
from .fock import _chunks, displacement_batch, parity
from .quadrature import PhaseGrid, gauss_laguerre, gauss_legendre
from .specfun import laguerre_table

__all__ = [
    "WeightFunction",
    "WeightClass",
    "cahill_glauber",
    "isometric_elliptic",
    "isometric_hyperbolic",
    "constant",
    "custom",
    "from_spec",
    "weight_to_operator",
    "classify",
    "default_sampler",
    "finite_difference_deriv0",
]

DERIV0_FIELDS = ("w0", "dz", "dzbar", "dzdzbar", "dz2", "dzbar2")


@dataclass(frozen=True)
class WeightFunction:
    """A weight ``varpi`` with its symmetry tag and derivative data at 0.

    ``deriv0`` holds ``(varpi(0), d_z, d_zbar, d_z d_zbar, d_z^2, d_zbar^2)``
    evaluated at the origin.  ``jet(p, r)`` returns
    ``d_zbar^p d_z^r varpi(0)`` to arbitrary order when the family knows it.
    ``geometric_r`` is set when ``M(z) = (1 - r) D(z) r^N D(z)^dag``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    kind: str = "generic"
    deriv0: Optional[tuple] = None
    family: str = "custom"
    param: float = 0.0
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breaks: Optional[Callable[[float], Optional[float]]] = None
    growth: float = 0.0
    jet: Optional[Callable[[int, int], complex]] = field(default=None, repr=False)
    geometric_r: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("isotropic", "hyperbolic", "generic"):
            raise ConfigError(f"unknown weight kind {self.kind!r}")

    def __call__(self, z):
        return self.eval(np.asarray(z, dtype=complex))

    @property
    def label(self) -> str:
        return f"{self.family}:{self.param:g}"

    def derivative(self, p: int, r: int) -> complex:
        """``d_zbar^p d_z^r varpi`` at the origin."""
        if self.jet is not None:
            return complex(self.jet(p, r))
        if p + r > 2:
            raise MissingDerivatives(
                f"{self.label}: no derivative of order {p + r} at the origin")
        d = self.deriv0 if self.deriv0 is not None else finite_difference_deriv0(self)
        table = {(0, 0): d[0], (0, 1): d[1], (1, 0): d[2], (1, 1): d[3],
                 (0, 2): d[4], (2, 0): d[5]}
        return complex(table[(p, r)])

    def with_deriv0(self) -> "WeightFunction":
        """Copy with ``deriv0`` filled in (finite differences if needed)."""
        if self.deriv0 is not None:
            return self
        if self.jet is not None:
            d = tuple(self.jet(p, r) for p, r in ((0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)))
        else:
            d = finite_difference_deriv0(self)
        return replace(self, deriv0=d)


@dataclass(frozen=True)
class WeightClass:
    regular: bool
    isometric: bool
    elliptic: bool
    hyperbolic: bool


def finite_difference_deriv0(w: WeightFunction, h: float = 1e-4) -> tuple:
    """Wirtinger derivatives at 0 by central differences in ``z = x + iy``."""
    f = lambda x, y: complex(w(np.array(complex(x, y))))
    f00 = f(0.0, 0.0)
    fx = (f(h, 0) - f(-h, 0)) / (2 * h)
    fy = (f(0, h) - f(0, -h)) / (2 * h)
    fxx = (f(h, 0) - 2 * f00 + f(-h, 0)) / h ** 2
    fyy = (f(0, h) - 2 * f00 + f(0, -h)) / h ** 2
    fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    dz = 0.5 * (fx - 1j * fy)
    dzb = 0.5 * (fx + 1j * fy)
    lap = 0.25 * (fxx + fyy)
    dz2 = 0.25 * (fxx - fyy - 2j * fxy)
    dzb2 = 0.25 * (fxx - fyy + 2j * fxy)
    return (f00, dz, dzb, lap, dz2, dzb2)


# --------------------------------------------------------------------------
# Builtin families
# --------------------------------------------------------------------------

def _locally_constant_jet(p: int, r: int) -> complex:
    return 1.0 if p == 0 and r == 0 else 0.0


def cahill_glauber(s: float) -> WeightFunction:
    """``varpi_s(z) = exp(s|z|^2/2)`` for real ``s < 1``."""
    s = float(s)
    if not s < 1.0:
        raise ConfigError("cahill_glauber needs s < 1")

    def jet(p, r):
        if p != r:
            return 0.0
        return math.factorial(p) * (0.5 * s) ** p

    r = (s + 1.0) / (s - 1.0)
    return WeightFunction(
        eval=lambda z: np.exp(0.5 * s * np.abs(z) ** 2) + 0j,
        kind="isotropic",
        deriv0=(1.0, 0.0, 0.0, 0.5 * s, 0.0, 0.0),
        family="cahill_glauber",
        param=s,
        profile=lambda t: np.exp(0.5 * s * t),
        growth=0.5 * s,
        jet=jet,
        geometric_r=r,
    )


def constant() -> WeightFunction:
    return WeightFunction(
        eval=lambda z: np.ones(np.shape(z), dtype=complex),
        kind="isotropic",
        deriv0=(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        family="constant",
        param=1.0,
        profile=lambda t: np.ones(np.shape(t)),
        jet=_locally_constant_jet,
        geometric_r=-1.0,
    )


def isometric_elliptic(alpha: float) -> WeightFunction:
    """``2 theta(1 - alpha |z|^2) - 1``; values in {-1, +1}."""
    alpha = float(alpha)
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")

    def profile(t):
        return np.where(alpha * np.asarray(t) < 1.0, 1.0, -1.0)

    brk = None if alpha == 0 else (lambda theta, c=1.0 / alpha: c)
    return WeightFunction(
        eval=lambda z: profile(np.abs(z) ** 2) + 0j,
        kind="isotropic",
        deriv0=(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        family="elliptic_step",
        param=alpha,
        profile=profile,
        breaks=brk,
        jet=_locally_constant_jet,
        geometric_r=-1.0 if alpha == 0 else None,
    )


def isometric_hyperbolic(alpha: float) -> WeightFunction:
    """``2 theta(1 - alpha Im z^2) - 1``; depends on ``Im z^2 = q p`` only."""
    alpha = float(alpha)
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")

    def m(u):
        return np.where(alpha * np.asarray(u) < 1.0, 1.0, -1.0)

    def brk(theta):
        # Im z^2 = t sin(2 theta); the jump sits at t = 1/(alpha sin 2theta)
        s2 = math.sin(2.0 * theta)
        if alpha == 0 or s2 <= 0:
            return None
        return 1.0 / (alpha * s2)

    return WeightFunction(
        eval=lambda z: m(np.imag(np.asarray(z) ** 2)) + 0j,
        kind="hyperbolic",
        deriv0=(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        family="hyperbolic_step",
        param=alpha,
        profile=m,
        breaks=brk,
        jet=_locally_constant_jet,
        geometric_r=-1.0 if alpha == 0 else None,
    )


def custom(fn: Callable, kind: str = "generic", deriv0: Optional[Sequence] = None,
           growth: float = 0.0, breaks=None, name: str = "custom") -> WeightFunction:
    """Wrap a user weight; ``fn`` must accept complex arrays."""
    prof = None
    if kind == "isotropic":
        prof = lambda t: np.real(fn(np.sqrt(np.asarray(t, dtype=float)) + 0j))
    w = WeightFunction(eval=lambda z: np.asarray(fn(z), dtype=complex), kind=kind,
                       deriv0=tuple(deriv0) if deriv0 is not None else None,
                       family=name, profile=prof, growth=growth, breaks=breaks)
    v0 = complex(w(np.array(0j)))
    if abs(v0 - 1.0) > 1e-12:
        raise ConfigError(f"weight must satisfy varpi(0) = 1, got {v0}")
    return w


_FAMILIES = {
    "cahill_glauber": cahill_glauber,
    "elliptic_step": isometric_elliptic,
    "hyperbolic_step": isometric_hyperbolic,
    "constant": lambda _p=1.0: constant(),
}


def from_spec(spec) -> WeightFunction:
    """Build a weight from ``{"family": ..., "param": ...}`` or ``"family:param"``."""
    if isinstance(spec, WeightFunction):
        return spec
    if isinstance(spec, str):
        fam, _, par = spec.partition(":")
        spec = {"family": fam, "param": float(par) if par else 1.0}
    try:
        fam = spec["family"]
        par = float(spec.get("param", 1.0))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad weight spec {spec!r}") from exc
    extra = set(spec) - {"family", "param"}
    if extra:
        raise ConfigError(f"unknown weight keys {sorted(extra)}")
    if fam not in _FAMILIES:
        raise ConfigError(f"unknown weight family {fam!r}")
    return _FAMILIES[fam](par)


BUILTIN_REGULAR = (
    "constant:1",
    "cahill_glauber:0",
    "cahill_glauber:-0.25",
    "cahill_glauber:-1",
    "cahill_glauber:-2",
    "cahill_glauber:-4",
    "elliptic_step:0.5",
    "elliptic_step:1",
    "hyperbolic_step:0.3",
    "hyperbolic_step:1",
)


# --------------------------------------------------------------------------
# The operator M
# --------------------------------------------------------------------------

def _check_supported(w: WeightFunction):
    if w.growth > 0:
        raise NonAbsolutelyConvergent(
            f"{w.label}: growth exp({w.growth:g}|z|^2) is outside the supported class "
            "(only norm-convergent weights, Re s <= 0, are accepted)")


def weight_to_operator(w: WeightFunction, dim: int, grid: Optional[PhaseGrid] = None) -> np.ndarray:
    """``M = int varpi(z) D(z) d^2z/pi`` in the truncated basis.

    Isotropic weights give a diagonal with entries
    ``int_0^inf w(t) e^{-t/2} L_n(t) dt``; other weights are integrated on
    the full polar grid.
    """
    _check_supported(w)
    grid = grid or PhaseGrid()
    if w.family == "cahill_glauber" and w.param == 0.0:
        return 2.0 * parity(dim)
    rate = 0.5 - w.growth
    if w.kind == "isotropic" and w.profile is not None:
        return np.diag(_radial_diagonal(w, dim, grid.R, rate)).astype(complex)
    z, wt = grid.rule(rate, breaks=w.breaks)
    out = np.zeros((dim, dim), dtype=complex)
    for sl in _chunks(len(z), dim):
        vals = wt[sl] * w(z[sl])
        out += np.tensordot(vals, displacement_batch(z[sl], dim), axes=(0, 0))
    return out


def _radial_diagonal(w: WeightFunction, dim: int, R: int, rate: float) -> np.ndarray:
    u, wu = gauss_laguerre(R)
    tb = w.breaks(0.0) if w.breaks is not None else None
    if tb is None or rate * tb > u[-1]:
        t = u / rate
        weights = wu * np.exp(u) / rate
    else:
        x, wx = gauss_legendre(R)
        t, weights = PhaseGrid._split_ray(tb, rate, u, wu, x, wx)
    f = w.profile(t) * weights
    lag = laguerre_table(dim - 1, 0.0, t, scale=np.exp(-0.5 * t))
    return lag @ f


# --------------------------------------------------------------------------
# Classification
# --------------------------------------------------------------------------

def default_sampler(n: int = 48, seed: int = 0, rmax: float = 3.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.05, rmax, n)
    th = rng.uniform(0, 2 * np.pi, n)
    return r * np.exp(1j * th)


def classify(w: WeightFunction, sampler=None, tol: float = 1e-10) -> WeightClass:
    """Sampled symmetry tests.

    Each base point is probed with its mirror ``-z``, a set of rotations
    ``e^{i theta} z`` (isotropy) and of squeezes ``(l q + i p/l)/sqrt 2``,
    which preserve ``Im z^2``.
    """
    z = np.asarray(default_sampler() if sampler is None else sampler, dtype=complex)
    if z.size == 0:
        raise ConfigError("sampler must be non-empty")
    v = w(z)
    parity_ok = np.all(np.abs(w(-z) - v) <= tol)
    real_ok = np.all(np.abs(np.imag(v)) <= tol)
    regular = bool(parity_ok and real_ok)
    isometric = bool(np.all(np.abs(np.abs(v) - 1.0) <= tol))
    rot_ok = all(np.all(np.abs(w(np.exp(1j * th) * z) - v) <= tol)
                 for th in (0.3, 1.1, 2.0, 2.9, 4.4))
    q, p = np.sqrt(2.0) * z.real, np.sqrt(2.0) * z.imag
    sq_ok = all(np.all(np.abs(w((lam * q + 1j * p / lam) / np.sqrt(2.0)) - v) <= tol)
                for lam in (0.4, 0.7, 1.6, 2.5))
    return WeightClass(regular=regular, isometric=isometric,
                       elliptic=bool(regular and rot_ok),
                       hyperbolic=bool(regular and sq_ok))
