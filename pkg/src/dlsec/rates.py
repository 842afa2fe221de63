"""Per-state and expected rate functionals.  All rates are nats per use.

The per-state picture for a policy P and state h = (h_m, h_e):

    r_main = log(1 + P h_m)          main-channel rate
    r_eve  = log(1 + P h_e)          eavesdropper-channel rate
    r_s    = [r_main - r_eve]^+      per-state secrecy rate
    r_s'   = [r_main - log(1 + P q(h))]^+   key share, q(h) >= h_e
    r_s''  = r_s - r_s'              direct secret-data share

Essential infima over the fading law are computed symbolically per policy
family, never by sampling: a minimum over an unbounded continuous support
is not estimable from finite draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fading import ChannelState, FadingDistribution, expectation
from .policy import PowerPolicy


@dataclass(frozen=True, eq=False)
class RateBreakdown:
    """Per-state rates; fields are scalars or arrays matching the state."""

    r_main: float | np.ndarray
    r_eve: float | np.ndarray
    r_s: float | np.ndarray
    r_s_prime: float | np.ndarray
    r_s_dprime: float | np.ndarray
    r_o: float | np.ndarray = 0.0


def q_threshold(kappa: float = 0.0):
    """The one-parameter q family: q(h) = max(h_e, kappa).

    kappa = 0 gives q = h_e, which zeroes the direct share and maximizes
    the key share.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")

    def q(state: ChannelState):
        return np.maximum(state.h_e, kappa)

    return q


def per_state_rates(policy: PowerPolicy, state: ChannelState, q=None) -> RateBreakdown:
    """Rate breakdown at one state (or a vector of states).

    ``q`` maps the state to a gain with q(h) >= h_e everywhere; None means
    q = h_e.  The one-time-pad rate ``r_o`` is left at 0 here; it is a
    schedule choice made by the bounds and protocol layers.
    """
    h_m = np.asarray(state.h_m, dtype=float)
    h_e = np.asarray(state.h_e, dtype=float)
    p = np.asarray(policy.power(state.h_m, state.h_e), dtype=float)
    qv = h_e if q is None else np.asarray(q(state), dtype=float)
    if np.any(qv < h_e):
        raise ValueError("q(h) must satisfy q(h) >= h_e for every state")
    r_main = np.log1p(p * h_m)
    r_eve = np.log1p(p * h_e)
    r_s = np.maximum(r_main - r_eve, 0.0)
    r_s_prime = np.maximum(r_main - np.log1p(p * qv), 0.0)
    r_s_dprime = np.maximum(r_s - r_s_prime, 0.0)

    def out(a):
        return float(a) if a.ndim == 0 else a

    return RateBreakdown(out(r_main), out(r_eve), out(r_s),
                         out(r_s_prime), out(r_s_dprime))


def ergodic_secrecy_rate(policy: PowerPolicy, dist_m: FadingDistribution,
                         dist_e: FadingDistribution, nodes: int = 200) -> float:
    """E[r_s] by quadrature against the joint fading law."""
    return expectation(lambda st: per_state_rates(policy, st).r_s,
                       dist_m, dist_e, nodes)


def expected_key_share(policy: PowerPolicy, dist_m: FadingDistribution,
                       dist_e: FadingDistribution, q=None, nodes: int = 200) -> float:
    """E[r_s'] by quadrature, for the configured q."""
    return expectation(lambda st: per_state_rates(policy, st, q).r_s_prime,
                       dist_m, dist_e, nodes)


def delay_floor(policy: PowerPolicy, dist_m: FadingDistribution) -> float:
    """Essential infimum of the main-channel rate, per family, in closed form.

    const over support reaching 0 -> 0; inversion families -> log(1 + c)
    (P * h_m >= c pointwise, with equality on the minimizing coordinate);
    trunc-inv -> 0 whenever the support extends below the cutoff.
    """
    lo = dist_m.support_min
    if policy.family == "const":
        return float(np.log1p(policy.c * lo))
    if policy.family in ("full-inv", "main-inv"):
        return float(np.log1p(policy.c))
    # trunc-inv: power is zero below the cutoff
    if lo < policy.h_min:
        return 0.0
    return float(np.log1p(policy.c))


def _pointwise(policy: PowerPolicy, dist_m: FadingDistribution,
               dist_e: FadingDistribution, q=None) -> RateBreakdown:
    """Rates at the single atom of a fully degenerate pair."""
    state = ChannelState(dist_m.params[0], dist_e.params[0])
    return per_state_rates(policy, state, q)


def common_rate_floor(policy: PowerPolicy, dist_m: FadingDistribution,
                      dist_e: FadingDistribution) -> float:
    """Essential infimum of min(r_main, r_eve) over the joint support.

    full-inv pins it at log(1 + c) exactly: whichever gain attains the
    minimum sees P * h = c.  Any continuous marginal drives the infimum to
    zero for the other families (a vanishing gain, or an unbounded h_m
    under main inversion); a fully degenerate pair is evaluated at its atom.
    """
    if policy.family == "full-inv":
        return float(np.log1p(policy.c))
    if dist_m.is_degenerate and dist_e.is_degenerate:
        r = _pointwise(policy, dist_m, dist_e)
        return float(min(r.r_main, r.r_eve))
    return 0.0


def direct_rate_floor(policy: PowerPolicy, dist_m: FadingDistribution,
                      dist_e: FadingDistribution, q=None) -> float:
    """Essential infimum of r_s'' over the joint support.

    Zero whenever either marginal is continuous: states with h_e >= h_m
    (secrecy outage) or zero power occur with positive probability and
    force r_s'' to 0 there.  A fully degenerate pair is evaluated at its
    atom.
    """
    if dist_m.is_degenerate and dist_e.is_degenerate:
        return float(_pointwise(policy, dist_m, dist_e, q).r_s_dprime)
    return 0.0
