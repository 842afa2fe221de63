"""Deterministic numeric kernels shared across the package.

Quadrature on the half line (rational map plus Gauss-Legendre), bisection,
golden-section maximization, and seeded Monte Carlo expectation with
standard-error reporting.  Everything here is pure: identical inputs give
bit-identical outputs, and Monte Carlo is reproducible through the
(seed, stream) contract of :class:`RngSeed`.

All rates handled downstream are in nats; nothing in this module assumes a
unit beyond "whatever the integrand carries".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonFiniteIntegrandError(ValueError):
    """The integrand returned NaN or +-inf at an evaluation point."""


class BracketingError(ValueError):
    """A root finder was called without a sign change on its bracket."""


@dataclass(frozen=True)
class RngSeed:
    """Seed plus stream index for reproducible, parallelizable sampling.

    Identical (seed, stream) pairs reproduce identical sample sequences;
    distinct streams give statistically independent draws, so work can be
    decomposed across streams and pooled in any order.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream) < 0:
            raise ValueError(f"stream must be non-negative, got {self.stream}")

    def generator(self, *lane: int) -> np.random.Generator:
        """A fresh PCG64 generator for this (seed, stream) pair.

        Extra ``lane`` keys derive independent sub-streams (used by the
        protocol simulator to separate channel, data and key draws).
        """
        key = (int(self.stream),) + tuple(int(k) for k in lane)
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=key)
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Estimate:
    """An expectation value together with its sampling uncertainty.

    ``stderr`` is zero only for deterministic results (quadrature, or a
    constant integrand).
    """

    mean: float
    stderr: float
    samples: int

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean}")
        if not (self.stderr >= 0.0):
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")


@lru_cache(maxsize=None)
def halfline_nodes(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Abscissas and weights for integrals over (0, inf).

    Fixed change of variables x = t / (1 - t) mapping (0, 1) onto
    (0, inf), with Gauss-Legendre nodes on (0, 1).  Tail truncation is
    implicit in the node placement.  Returned arrays are read-only and
    cached, so two calls with the same node count share storage.
    """
    if nodes < 8:
        raise ValueError(f"nodes must be >= 8, got {nodes}")
    u, w = np.polynomial.legendre.leggauss(int(nodes))
    t = 0.5 * (u + 1.0)
    x = t / (1.0 - t)
    weights = 0.5 * w / (1.0 - t) ** 2
    x.flags.writeable = False
    weights.flags.writeable = False
    return x, weights


@lru_cache(maxsize=None)
def unit_nodes(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre abscissas and weights on (0, 1), read-only."""
    if nodes < 8:
        raise ValueError(f"nodes must be >= 8, got {nodes}")
    u, w = np.polynomial.legendre.leggauss(int(nodes))
    t = 0.5 * (u + 1.0)
    wt = 0.5 * w
    t.flags.writeable = False
    wt.flags.writeable = False
    return t, wt


def integrate_halfline(f: Callable[[np.ndarray], np.ndarray], nodes: int = 200) -> float:
    """Integrate ``f`` over (0, inf) with the fixed rational-map rule.

    ``f`` must accept a 1-D ndarray of abscissas and return values of the
    same shape (a scalar is broadcast).  The caller folds any density
    weight into ``f``; with a probability density folded in, the result is
    the corresponding expectation.

    Deterministic: two calls with identical arguments return bit-identical
    results.

    Raises:
        NonFiniteIntegrandError: naming the offending node when ``f`` is
            not finite somewhere on the grid.
    """
    x, w = halfline_nodes(nodes)
    y = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    bad = ~np.isfinite(y)
    if bad.any():
        i = int(np.argmax(bad))
        raise NonFiniteIntegrandError(
            f"integrand not finite at node x={x[i]:.9g} (node {i} of {nodes})"
        )
    return float(np.dot(w, y))


def bisect(g: Callable[[float], float], lo: float, hi: float, tol: float,
           max_iter: int = 200) -> float:
    """Root of a continuous monotone ``g`` on [lo, hi] by bisection.

    Requires a sign change (or an exact zero) at the endpoints.  Returns
    the midpoint of the final bracket, whose width is <= tol.
    """
    if not (tol > 0.0):
        raise ValueError(f"tol must be positive, got {tol}")
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    glo = float(g(lo))
    if glo == 0.0:
        return lo
    ghi = float(g(hi))
    if ghi == 0.0:
        return hi
    if (glo > 0) == (ghi > 0):
        raise BracketingError(
            f"no bracketing: g({lo:.6g})={glo:.6g} and g({hi:.6g})={ghi:.6g} "
            "have the same sign"
        )
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        gm = float(g(mid))
        if gm == 0.0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_max(f: Callable[[float], float], lo: float, hi: float,
               tol: float) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on [lo, hi] by golden-section search.

    Returns (argmax, max) evaluated at the midpoint of the final bracket,
    whose width is <= tol.
    """
    if lo >= hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if not (tol > 0.0):
        raise ValueError(f"tol must be positive, got {tol}")
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = float(f(c)), float(f(d))
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = float(f(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = float(f(d))
    xm = 0.5 * (a + b)
    return xm, float(f(xm))


def mc_expect(f, dist_m, dist_e, n: int, seed: RngSeed) -> Estimate:
    """Monte Carlo estimate of E[f(h)] over independent channel gains.

    ``f`` maps a ChannelState with array-valued fields to an array of per
    sample values (a scalar is broadcast).  The estimate is deterministic
    given ``seed``; stderr is the sample standard deviation over sqrt(n).
    """
    from .fading import ChannelState  # runtime import avoids a module cycle

    if n < 100:
        raise ValueError(f"n must be >= 100, got {n}")
    rng = seed.generator()
    h_m = dist_m.sample(rng, n)
    h_e = dist_e.sample(rng, n)
    y = np.broadcast_to(np.asarray(f(ChannelState(h_m, h_e)), dtype=float), (n,))
    bad = ~np.isfinite(y)
    if bad.any():
        i = int(np.argmax(bad))
        raise NonFiniteIntegrandError(
            f"integrand not finite at sample {i} (h_m={h_m[i]:.6g}, h_e={h_e[i]:.6g})"
        )
    mean = float(y.mean())
    stderr = float(y.std(ddof=1) / math.sqrt(n))
    return Estimate(mean=mean, stderr=stderr, samples=n)


def pool_estimates(parts: Sequence[Estimate]) -> Estimate:
    """Pool estimates from disjoint streams into one.

    Reconstructs the pooled sample mean and standard error exactly from the
    per-part summaries, so the result is independent of the order of
    ``parts`` up to floating-point rounding.
    """
    if not parts:
        raise ValueError("nothing to pool")
    n_total = sum(p.samples for p in parts)
    total = sum(p.mean * p.samples for p in parts)
    sumsq = sum((p.samples - 1) * (p.stderr ** 2) * p.samples + p.samples * p.mean ** 2
                for p in parts)
    mean = total / n_total
    if n_total > 1:
        var = max(sumsq - n_total * mean ** 2, 0.0) / (n_total - 1)
        stderr = math.sqrt(var / n_total)
    else:
        stderr = 0.0
    return Estimate(mean=mean, stderr=stderr, samples=n_total)
