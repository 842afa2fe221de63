"""Delay-limited secrecy rate bounds under full and main-only CSI.

Four bound operations share one recipe: calibrate each family in a menu to
the power budget, evaluate that family's objective, and keep the best.
Maximization never goes beyond a menu plus one scalar parameter per family
(globally optimal power control is out of scope), so every search here is
either closed-form or a golden-section pass.

The main-CSI achievable rate is self-referential: the sustainable one-time
pad data rate R must satisfy R = min{K(R), R_d}, where K(R) is the secure
key rate left after carrying R on the main channel.  K is continuous and
non-increasing in R, so g(R) = R - min{K(R), R_d} is strictly increasing
with g(0) <= 0 <= g(R_d), and bisection on [0, R_d] finds the unique fixed
point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .fading import FadingDistribution, inverse_min_moment, joint_grid
from .numerics import bisect, golden_max, halfline_nodes, unit_nodes
from .policy import (MAIN_CSI, NonInvertibleChannelError, PowerPolicy,
                     calibrate, parse_policy)
from .rates import (common_rate_floor, delay_floor, direct_rate_floor,
                    ergodic_secrecy_rate, expected_key_share, q_threshold)

DEFAULT_FULL_MENU = ("const", "full-inv", "main-inv", "trunc-inv")
DEFAULT_MAIN_MENU = ("const", "main-inv", "trunc-inv")

_FIXED_POINT_TOL = 1e-10
_CERT_TOL = 1e-9


@dataclass
class BoundResult:
    """A bound value (nats/use), the maximizing policy, and diagnostics."""

    value: float
    policy: PowerPolicy
    diagnostics: dict = field(default_factory=dict)


class HighSnrLimit(NamedTuple):
    """Value of E[(log(h_m/h_e))^+] plus the invertibility flag that gates
    its achievability (finiteness of E[1/min(h_m, h_e)])."""

    value: float
    invertible: bool


def resolve_menu_entry(entry: str, dist_m: FadingDistribution) -> tuple[str, float]:
    """Menu entries follow the policy grammar; a bare 'trunc-inv' defaults
    its cutoff to the median main gain."""
    if entry.strip().lower() == "trunc-inv":
        return "trunc-inv", dist_m.quantile(0.5)
    return parse_policy(entry)


def _fallback(dist_m, dist_e, p_bar, nodes, infeasible, skipped) -> BoundResult:
    """All requested families were unusable: report constant power (whose
    delay floor is 0 for any law with support reaching 0) with a warning."""
    pol = PowerPolicy("const", p_bar)
    floor = delay_floor(pol, dist_m)
    diag = {
        "warning": "all requested families infeasible; reporting const fallback",
        "infeasible": infeasible,
        "r_d_floor": floor,
    }
    if skipped:
        diag["skipped"] = skipped
    value = 0.0
    if floor > 0.0:
        ers = ergodic_secrecy_rate(pol, dist_m, dist_e, nodes)
        value = min(ers, floor)
        diag["r_s_expected"] = ers
    return BoundResult(value=value, policy=pol, diagnostics=diag)


def _upper(dist_m, dist_e, p_bar, menu, nodes, csi) -> BoundResult:
    candidates = []
    infeasible: dict[str, str] = {}
    skipped: dict[str, str] = {}
    for entry in menu:
        family, h_min = resolve_menu_entry(entry, dist_m)
        if csi == MAIN_CSI and family == "full-inv":
            skipped[entry] = "needs full CSI"
            continue
        try:
            pol = calibrate(family, dist_m, dist_e, p_bar, h_min)
        except NonInvertibleChannelError as err:
            infeasible[entry] = str(err)
            continue
        floor = delay_floor(pol, dist_m)
        diag = {"r_d_floor": floor}
        if floor <= 0.0:
            value = 0.0
            diag["binding"] = "r_d_floor"
        else:
            ers = ergodic_secrecy_rate(pol, dist_m, dist_e, nodes)
            value = min(ers, floor)
            diag["r_s_expected"] = ers
            diag["binding"] = "r_s_expected" if ers <= floor else "r_d_floor"
        candidates.append((value, pol, diag))
    if not candidates:
        return _fallback(dist_m, dist_e, p_bar, nodes, infeasible, skipped)
    value, pol, diag = max(candidates, key=lambda c: c[0])
    if infeasible:
        diag["infeasible"] = infeasible
    if skipped:
        diag["skipped"] = skipped
    return BoundResult(value=value, policy=pol, diagnostics=diag)


def upper_full(dist_m: FadingDistribution, dist_e: FadingDistribution, p_bar: float,
               family_menu: Sequence[str] | None = None, nodes: int = 200) -> BoundResult:
    """Upper bound with both gains known: max over the menu of
    min{E[r_s], ess-inf r_main}."""
    menu = DEFAULT_FULL_MENU if family_menu is None else tuple(family_menu)
    return _upper(dist_m, dist_e, p_bar, menu, nodes, csi="full")


def upper_main(dist_m: FadingDistribution, dist_e: FadingDistribution, p_bar: float,
               family_menu: Sequence[str] | None = None, nodes: int = 200) -> BoundResult:
    """Upper bound with only the main gain known: as :func:`upper_full` but
    restricted to policies that depend on h_m alone."""
    menu = DEFAULT_MAIN_MENU if family_menu is None else tuple(family_menu)
    return _upper(dist_m, dist_e, p_bar, menu, nodes, csi="main")


def lower_full(dist_m: FadingDistribution, dist_e: FadingDistribution, p_bar: float,
               family_menu: Sequence[str] | None = None, q_kappa: float | None = None,
               nodes: int = 200) -> BoundResult:
    """Achievable rate of the two-stage scheme with both gains known.

    With the pad rate held constant in the fading state (a constant
    allocation maximizes a min over states for a fixed budget), the value
    for one policy and one q is

        ess-inf r_s''  +  min{ E[r_s'], ess-inf min(r_main, r_eve) }.

    ``q_kappa`` pins q(h) = max(h_e, kappa); None searches over kappa.  For
    any law with a continuous marginal the direct-share floor is
    identically zero and E[r_s'] is pointwise non-increasing in kappa, so
    kappa = 0 (q = h_e) is exactly optimal and the search is skipped.
    """
    menu = DEFAULT_FULL_MENU if family_menu is None else tuple(family_menu)
    candidates = []
    infeasible: dict[str, str] = {}
    for entry in menu:
        family, h_min = resolve_menu_entry(entry, dist_m)
        try:
            pol = calibrate(family, dist_m, dist_e, p_bar, h_min)
        except NonInvertibleChannelError as err:
            infeasible[entry] = str(err)
            continue
        cap = common_rate_floor(pol, dist_m, dist_e)

        def value_at(kappa: float, pol=pol, cap=cap) -> tuple[float, dict]:
            q = q_threshold(kappa)
            key_mean = expected_key_share(pol, dist_m, dist_e, q, nodes)
            r_o = min(key_mean, cap)
            dfloor = direct_rate_floor(pol, dist_m, dist_e, q)
            diag = {
                "q_kappa": kappa,
                "r_o_chosen": r_o,
                "r_o_cap": cap,
                "r_s_prime_expected": key_mean,
                "r_dprime_floor": dfloor,
                "key_budget_margin": key_mean - r_o,
                "common_rate_margin": cap - r_o,
            }
            diag["feasible"] = (diag["key_budget_margin"] >= -_CERT_TOL
                                and diag["common_rate_margin"] >= -_CERT_TOL)
            return dfloor + r_o, diag

        if q_kappa is not None:
            value, diag = value_at(float(q_kappa))
        else:
            value, diag = value_at(0.0)
            if dist_m.is_degenerate and dist_e.is_degenerate:
                # only here can a positive kappa trade key share for a
                # nonzero direct-share floor
                kappa_hi = dist_m.params[0] + dist_e.params[0]
                k_best, v_best = golden_max(lambda k: value_at(k)[0],
                                            0.0, kappa_hi, tol=1e-9)
                if v_best > value:
                    value, diag = value_at(k_best)
        candidates.append((value, pol, diag))
    if not candidates:
        return _fallback(dist_m, dist_e, p_bar, nodes, infeasible, {})
    value, pol, diag = max(candidates, key=lambda c: c[0])
    if infeasible:
        diag["infeasible"] = infeasible
    return BoundResult(value=value, policy=pol, diagnostics=diag)


def fixed_point_rate(policy: PowerPolicy, dist_m: FadingDistribution,
                     dist_e: FadingDistribution, nodes: int = 200,
                     tol: float = _FIXED_POINT_TOL) -> tuple[float, dict]:
    """Solve R = min{K(R), R_d} for one calibrated main-CSI policy.

    K(R) = E[(r_main - R - r_eve)^+] is precomputed on the quadrature grid
    so each evaluation is a single weighted clip.  Returns the fixed point
    and a diagnostics dict.
    """
    r_d = delay_floor(policy, dist_m)
    diag: dict = {"r_d_floor": r_d, "fixed_point_iterations": 0}
    if r_d <= 0.0:
        diag["key_rate_at_zero"] = 0.0
        diag["key_balance_margin"] = 0.0
        diag["feasible"] = True
        return 0.0, diag
    hm, he, w = joint_grid(dist_m, dist_e, nodes)
    p = policy.power(hm, he)
    gap = np.log1p(p * hm) - np.log1p(p * he)

    def key_rate(r: float) -> float:
        return float(np.dot(w, np.maximum(gap - r, 0.0)))

    def g(r: float) -> float:
        return r - min(key_rate(r), r_d)

    root = bisect(g, 0.0, r_d, tol)
    diag["fixed_point_iterations"] = max(int(math.ceil(math.log2(max(r_d / tol, 1.0)))), 1)
    diag["key_rate_at_zero"] = key_rate(0.0)
    k_root = key_rate(root)
    diag["key_balance_margin"] = min(k_root, r_d) - root
    diag["feasible"] = diag["key_balance_margin"] >= -max(_CERT_TOL, 2.0 * tol)
    return root, diag


def lower_main(dist_m: FadingDistribution, dist_e: FadingDistribution, p_bar: float,
               family_menu: Sequence[str] | None = None, nodes: int = 200) -> BoundResult:
    """Achievable rate with only the main gain known: everything rides the
    one-time pad, and the sustainable rate is the fixed point of the key
    balance, maximized over main-CSI families."""
    menu = DEFAULT_MAIN_MENU if family_menu is None else tuple(family_menu)
    candidates = []
    infeasible: dict[str, str] = {}
    skipped: dict[str, str] = {}
    for entry in menu:
        family, h_min = resolve_menu_entry(entry, dist_m)
        if family == "full-inv":
            skipped[entry] = "needs full CSI"
            continue
        try:
            pol = calibrate(family, dist_m, dist_e, p_bar, h_min)
        except NonInvertibleChannelError as err:
            infeasible[entry] = str(err)
            continue
        value, diag = fixed_point_rate(pol, dist_m, dist_e, nodes)
        candidates.append((value, pol, diag))
    if not candidates:
        return _fallback(dist_m, dist_e, p_bar, nodes, infeasible, skipped)
    value, pol, diag = max(candidates, key=lambda c: c[0])
    if infeasible:
        diag["infeasible"] = infeasible
    if skipped:
        diag["skipped"] = skipped
    return BoundResult(value=value, policy=pol, diagnostics=diag)


def high_snr_limit(dist_m: FadingDistribution, dist_e: FadingDistribution,
                   nodes: int = 400) -> HighSnrLimit:
    """E[(log(h_m/h_e))^+] plus the invertibility flag.

    The positive-part region {h_m > h_e} is integrated exactly: the inner
    integral runs over h_e in (0, h_m) through the substitution
    h_e = t * h_m, which keeps the quadrature away from the kink along the
    diagonal.
    """
    invertible = math.isfinite(inverse_min_moment(dist_m, dist_e))
    if dist_m.is_degenerate and dist_e.is_degenerate:
        value = max(math.log(dist_m.params[0] / dist_e.params[0]), 0.0)
        return HighSnrLimit(value, invertible)
    if dist_m.is_degenerate:
        vm = dist_m.params[0]
        t, wt = unit_nodes(nodes)
        value = vm * float(np.dot(wt, np.log(1.0 / t) * dist_e.pdf(vm * t)))
        return HighSnrLimit(value, invertible)
    if dist_e.is_degenerate:
        ve = dist_e.params[0]
        x, w = halfline_nodes(nodes)
        y = x + ve
        value = float(np.dot(w, np.log(y / ve) * dist_m.pdf(y)))
        return HighSnrLimit(value, invertible)
    x, wx = halfline_nodes(nodes)
    t, wt = unit_nodes(nodes)
    inner = dist_e.pdf(np.outer(x, t)) @ (wt * np.log(1.0 / t))
    value = float(np.dot(wx * dist_m.pdf(x) * x, inner))
    return HighSnrLimit(value, invertible)
