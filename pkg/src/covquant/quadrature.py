"""Polar quadrature on the complex plane for the measure d^2z/pi.

In polar form ``d^2z/pi = dt dtheta/(2 pi)`` with ``t = |z|^2``.  The radial
part is a Gauss-Laguerre rule in ``t`` rescaled to the decay rate of the
integrand, the angular part a uniform trapezoid.  Integrands of the form
``exp(-rate t) * poly(t) * exp(i k theta)`` are integrated exactly when the
polynomial degree is below ``2R`` and ``|k| < A``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_laguerre

__all__ = ["PhaseGrid", "gauss_laguerre", "gauss_legendre"]


@lru_cache(maxsize=32)
def gauss_laguerre(n: int):
    """Nodes and weights for ``int_0^inf e^{-u} g(u) du``."""
    u, w = roots_laguerre(n)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


@lru_cache(maxsize=32)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class PhaseGrid:
    """Polar product rule; ``R`` radial and ``A`` angular nodes.

    ``degree`` is the highest polynomial degree in ``t`` integrated exactly
    against the exponential weight.
    """

    R: int = 64
    A: int = 128

    def __post_init__(self):
        if self.R < 1 or self.A < 1:
            raise ValueError("PhaseGrid needs R >= 1 and A >= 1")

    @property
    def degree(self) -> int:
        return 2 * self.R - 1

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.A) / self.A

    def radial(self, rate: float = 1.0):
        """Radial nodes ``t`` and weights for ``int_0^inf g(t) dt``.

        The weights already contain ``exp(+rate t)`` so the caller passes
        the full integrand, decay included.
        """
        if rate <= 0:
            raise ValueError("decay rate must be positive")
        u, w = gauss_laguerre(self.R)
        return u / rate, w * np.exp(u) / rate

    def rule(self, rate: float = 1.0,
             breaks: Optional[Callable[[float], Optional[float]]] = None):
        """Flattened nodes ``z`` and weights for ``int g(z) d^2z/pi``.

        ``breaks(theta)`` may return a radial breakpoint ``t_b`` (or None)
        for each angle; the ray is then split into a Gauss-Legendre panel on
        ``[0, t_b]`` and a shifted Gauss-Laguerre panel on ``[t_b, inf)``, so
        the rule keeps its order across a jump of the integrand.
        """
        theta = self.angles
        if breaks is None:
            t, wt = self.radial(rate)
            z = np.sqrt(t)[:, None] * np.exp(1j * theta)[None, :]
            w = np.broadcast_to((wt / self.A)[:, None], z.shape)
            return z.ravel(), np.ascontiguousarray(w).ravel()

        zs, ws = [], []
        u, wu = gauss_laguerre(self.R)
        xl, wl = gauss_legendre(self.R)
        u_far = float(u[-1])
        for th in theta:
            tb = breaks(th)
            if tb is None or not np.isfinite(tb) or tb <= 0 or rate * tb > u_far:
                # a jump beyond the last Laguerre node is invisible to the rule
                t, wt = u / rate, wu * np.exp(u) / rate
            else:
                t, wt = self._split_ray(tb, rate, u, wu, xl, wl)
            zs.append(np.sqrt(t) * np.exp(1j * th))
            ws.append(wt / self.A)
        return np.concatenate(zs), np.concatenate(ws)

    @staticmethod
    def _split_ray(tb, rate, u, wu, xl, wl, width: float = 40.0):
        """Gauss-Legendre panels of at most ``width`` decay lengths on
        ``[0, tb]`` followed by a shifted Laguerre rule on ``[tb, inf)``."""
        npan = max(1, int(np.ceil(rate * tb / width)))
        edges = np.linspace(0.0, tb, npan + 1)
        ts, wts = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            ts.append(lo + 0.5 * (hi - lo) * (xl + 1.0))
            wts.append(0.5 * (hi - lo) * wl)
        ts.append(tb + u / rate)
        wts.append(wu * np.exp(u) / rate)
        return np.concatenate(ts), np.concatenate(wts)
