"""Block-level simulator of the two-stage key-renewal transmission scheme.

The simulator is a rate and secrecy LEDGER, not a waveform simulator:
channel coding is abstracted away, every block carries exactly its
scheduled bit load with no decoding errors, and "security" is tracked by
provenance (which lane a bit used, and which key generation covered it).
Key material is real seeded pseudo-random bits and the one-time pad lane
performs the actual XOR, so round-trip integrity is checked bit for bit.

Time structure: b super-blocks of a blocks of n1 symbols (n = b*a*n1).
Rates are nats per use throughout the package; this module converts to
bits at the ledger boundary, round(n1 * rate / ln 2), dropping fractional
remainders (never banking them).

Schemes:
    full      per-block key messages ride alongside a direct secret lane;
              decoded key bits enter the pad pool at block end, and the
              pool built by super-block m first serves super-block m+1
              (super-block 1's pad lane runs unencrypted by default).
    main      everything rides the one-time pad at the fixed-point rate;
              key bits decode only at super-block end.
    baseline  plain per-block wiretap coding, which zeroes out in every
              secrecy-outage block.

A finite-a backoff delta scales the consumption schedule below the mean
generation rate; at delta = 0 the empirical key rate dips below its
expectation on some super-blocks and the pad can starve.  Starvation is
not an error: the block's pad lane is skipped and the event is counted.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .bounds import fixed_point_rate
from .fading import ChannelState, FadingDistribution
from .numerics import RngSeed
from .policy import calibrate, parse_policy
from .rates import (common_rate_floor, expected_key_share, per_state_rates,
                    q_threshold)

LN2 = math.log(2.0)

SCHEMES = ("full", "main", "baseline")
INIT_MODES = ("insecure", "dedicated")

_STATE_LANE, _DATA_LANE, _KEY_LANE = 1, 2, 3

_CSV_HEADER = ("m,l,h_m,h_e,power,r_main,r_eve,r_s,r_s_prime,r_s_dprime,"
               "key_consumed,key_generated,data_delivered,insecure_bits,outage")


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulation run.

    ``policy`` uses the policy grammar; an empty string picks the scheme's
    natural default (full -> full-inv, main -> main-inv, baseline -> const).
    """

    scheme: str
    dist_m: FadingDistribution
    dist_e: FadingDistribution
    p_bar: float
    policy: str = ""
    b: int = 20
    a: int = 500
    n1: int = 10_000
    delta: float = 0.05
    q_kappa: float = 0.0
    init: str = "insecure"
    seed: RngSeed = RngSeed(0, 0)
    nodes: int = 200

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.init not in INIT_MODES:
            raise ValueError(f"unknown init mode {self.init!r}")
        for name, v in (("b", self.b), ("a", self.a), ("n1", self.n1)):
            if int(v) < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"backoff delta must be in [0, 1), got {self.delta}")
        if not (self.p_bar >= 0.0):
            raise ValueError(f"p_bar must be >= 0, got {self.p_bar}")
        if self.q_kappa < 0.0:
            raise ValueError(f"q_kappa must be >= 0, got {self.q_kappa}")

    @property
    def n(self) -> int:
        """Total symbol count b * a * n1."""
        return self.b * self.a * self.n1

    def policy_spec(self) -> str:
        if self.policy:
            return self.policy
        return {"full": "full-inv", "main": "main-inv", "baseline": "const"}[self.scheme]


@dataclass
class BlockRecord:
    """Ledger line for one fading block."""

    m: int
    l: int
    h_m: float
    h_e: float
    power: float
    r_main: float
    r_eve: float
    r_s: float
    r_s_prime: float
    r_s_dprime: float
    key_consumed: int
    key_generated: int
    data_delivered: int
    insecure_bits: int
    outage: bool


class KeyBuffer:
    """FIFO ledger of pad bits.

    ``available`` bits may be consumed for encryption; ``pending`` bits are
    generated but not yet decodable and join the pool via
    :meth:`commit_pending` (used by the main-CSI scheme at super-block
    boundaries).  Consumption never exceeds the available count.
    """

    def __init__(self):
        self._segments: deque[np.ndarray] = deque()
        self._head_offset = 0
        self._pending: list[np.ndarray] = []
        self.available = 0
        self.pending = 0

    def generate(self, bits: np.ndarray, immediate: bool) -> None:
        if bits.size == 0:
            return
        if immediate:
            self._segments.append(bits)
            self.available += bits.size
        else:
            self._pending.append(bits)
            self.pending += bits.size

    def commit_pending(self) -> None:
        for seg in self._pending:
            self._segments.append(seg)
        self.available += self.pending
        self._pending = []
        self.pending = 0

    def consume(self, nbits: int) -> np.ndarray:
        if nbits < 0:
            raise ValueError("cannot consume a negative bit count")
        if nbits > self.available:
            raise ValueError(
                f"consumption ({nbits}) exceeds available key bits ({self.available})"
            )
        parts = []
        remaining = nbits
        while remaining > 0:
            head = self._segments[0]
            take = min(remaining, head.size - self._head_offset)
            parts.append(head[self._head_offset:self._head_offset + take])
            self._head_offset += take
            remaining -= take
            if self._head_offset == head.size:
                self._segments.popleft()
                self._head_offset = 0
        self.available -= nbits
        if not parts:
            return np.empty(0, dtype=np.uint8)
        return np.concatenate(parts)


@dataclass
class SimReport:
    """Complete ledger of one protocol run."""

    config: SimConfig
    records: list[BlockRecord]
    buffer_trajectory: list[int]
    starvation_events: int
    insecure_fraction: float
    otp_insecure_fraction: float
    outage_fraction: float
    roundtrip_ok: bool
    schedule: dict = field(default_factory=dict)
    totals: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        cfg = self.config
        columns = {
            name: [getattr(r, name) for r in self.records]
            for name in ("m", "l", "h_m", "h_e", "power", "r_main", "r_eve",
                         "r_s", "r_s_prime", "r_s_dprime", "key_consumed",
                         "key_generated", "data_delivered", "insecure_bits")
        }
        columns["outage"] = [int(r.outage) for r in self.records]
        return {
            "config": {
                "scheme": cfg.scheme,
                "dist_m": cfg.dist_m.spec(),
                "dist_e": cfg.dist_e.spec(),
                "policy": cfg.policy_spec(),
                "p_bar": cfg.p_bar,
                "b": cfg.b,
                "a": cfg.a,
                "n1": cfg.n1,
                "delta": cfg.delta,
                "q_kappa": cfg.q_kappa,
                "init": cfg.init,
                "seed": {"seed": cfg.seed.seed, "stream": cfg.seed.stream},
                "nodes": cfg.nodes,
            },
            "schedule": self.schedule,
            "totals": self.totals,
            "starvation_events": self.starvation_events,
            "insecure_fraction": self.insecure_fraction,
            "otp_insecure_fraction": self.otp_insecure_fraction,
            "outage_fraction": self.outage_fraction,
            "roundtrip_ok": self.roundtrip_ok,
            "buffer_trajectory": self.buffer_trajectory,
            "records": columns,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1)

    def csv_text(self) -> str:
        lines = [_CSV_HEADER]
        for r in self.records:
            lines.append(",".join([
                str(r.m), str(r.l),
                repr(r.h_m), repr(r.h_e), repr(r.power),
                repr(r.r_main), repr(r.r_eve), repr(r.r_s),
                repr(r.r_s_prime), repr(r.r_s_dprime),
                str(r.key_consumed), str(r.key_generated),
                str(r.data_delivered), str(r.insecure_bits),
                str(int(r.outage)),
            ]))
        return "\n".join(lines) + "\n"


def otp(data, key) -> np.ndarray:
    """Bitwise XOR of two equal-length 0/1 sequences (involutive)."""
    d = np.asarray(data, dtype=np.uint8)
    k = np.asarray(key, dtype=np.uint8)
    if d.shape != k.shape:
        raise ValueError(f"length mismatch: data has {d.size} bits, key has {k.size}")
    if np.any(d > 1) or np.any(k > 1):
        raise ValueError("one-time pad operates on 0/1 bit sequences")
    return np.bitwise_xor(d, k)


def _bits(rate_nats: float, n1: int) -> int:
    """Bit load of one block at the given rate; remainders are dropped."""
    return int(round(n1 * max(rate_nats, 0.0) / LN2))


def simulate(config: SimConfig) -> SimReport:
    """Run the configured scheme and return its ledger.

    Deterministic: identical configs (including the seed) produce
    identical reports.
    """
    family, h_min = parse_policy(config.policy_spec())
    pol = calibrate(family, config.dist_m, config.dist_e, config.p_bar, h_min)
    nblocks = config.a * config.b
    state_rng = config.seed.generator(_STATE_LANE)
    h_m = config.dist_m.sample(state_rng, nblocks)
    h_e = config.dist_e.sample(state_rng, nblocks)
    q = q_threshold(config.q_kappa)
    rb = per_state_rates(pol, ChannelState(h_m, h_e), q)
    power = np.broadcast_to(np.asarray(pol.power(h_m, h_e), dtype=float), h_m.shape)

    if config.scheme == "full":
        return _run_full(config, pol, h_m, h_e, power, rb)
    if config.scheme == "main":
        return _run_main(config, pol, h_m, h_e, power, rb)
    return _run_baseline(config, pol, h_m, h_e, power, rb)


def _assemble(config, records, trajectory, starvation, roundtrip_ok,
              otp_total, otp_insecure, schedule) -> SimReport:
    delivered = sum(r.data_delivered for r in records)
    insecure = sum(r.insecure_bits for r in records)
    totals = {
        "data_delivered": delivered,
        "insecure_bits": insecure,
        "otp_bits": otp_total,
        "otp_insecure_bits": otp_insecure,
        "key_generated": sum(r.key_generated for r in records),
        "key_consumed": sum(r.key_consumed for r in records),
    }
    outage_fraction = sum(1 for r in records if r.outage) / len(records)
    return SimReport(
        config=config,
        records=records,
        buffer_trajectory=trajectory,
        starvation_events=starvation,
        insecure_fraction=(insecure / delivered) if delivered else 0.0,
        otp_insecure_fraction=(otp_insecure / otp_total) if otp_total else 0.0,
        outage_fraction=outage_fraction,
        roundtrip_ok=roundtrip_ok,
        schedule=schedule,
        totals=totals,
    )


def _encrypt_and_verify(buffer: KeyBuffer, data_rng, nbits: int) -> bool:
    """Consume pad bits, XOR fresh data bits, and decrypt them back."""
    key_bits = buffer.consume(nbits)
    data_bits = data_rng.integers(0, 2, nbits, dtype=np.uint8)
    cipher = otp(data_bits, key_bits)
    return bool(np.array_equal(otp(cipher, key_bits), data_bits))


def _run_full(config, pol, h_m, h_e, power, rb) -> SimReport:
    key_mean = expected_key_share(pol, config.dist_m, config.dist_e,
                                  q_threshold(config.q_kappa), config.nodes)
    cap = common_rate_floor(pol, config.dist_m, config.dist_e)
    r_o = (1.0 - config.delta) * min(key_mean, cap)
    sched = _bits(r_o, config.n1)
    schedule = {
        "r_o": r_o,
        "otp_bits_per_block": sched,
        "key_share_expected": key_mean,
        "r_o_cap": cap,
        "backoff": config.delta,
    }
    buffer = KeyBuffer()
    data_rng = config.seed.generator(_DATA_LANE)
    key_rng = config.seed.generator(_KEY_LANE)
    records: list[BlockRecord] = []
    trajectory: list[int] = []
    starvation = 0
    roundtrip_ok = True
    otp_total = otp_insecure = 0
    idx = 0
    for m in range(1, config.b + 1):
        for l in range(1, config.a + 1):
            key_gen = _bits(rb.r_s_prime[idx], config.n1)
            direct = _bits(rb.r_s_dprime[idx], config.n1)
            consumed = insecure = 0
            delivered = direct
            if m == 1:
                if config.init == "insecure":
                    # no earlier pool exists; the pad lane runs in the clear
                    delivered += sched
                    insecure = sched
                    otp_total += sched
                    otp_insecure += sched
                else:
                    delivered = 0
            else:
                if buffer.available < sched:
                    starvation += 1
                else:
                    roundtrip_ok &= _encrypt_and_verify(buffer, data_rng, sched)
                    consumed = sched
                    delivered += sched
                    otp_total += sched
            gen_bits = key_rng.integers(0, 2, key_gen, dtype=np.uint8)
            buffer.generate(gen_bits, immediate=True)
            records.append(BlockRecord(
                m=m, l=l, h_m=float(h_m[idx]), h_e=float(h_e[idx]),
                power=float(power[idx]), r_main=float(rb.r_main[idx]),
                r_eve=float(rb.r_eve[idx]), r_s=float(rb.r_s[idx]),
                r_s_prime=float(rb.r_s_prime[idx]),
                r_s_dprime=float(rb.r_s_dprime[idx]),
                key_consumed=consumed, key_generated=key_gen,
                data_delivered=delivered, insecure_bits=insecure,
                outage=False,
            ))
            trajectory.append(buffer.available)
            idx += 1
    return _assemble(config, records, trajectory, starvation, roundtrip_ok,
                     otp_total, otp_insecure, schedule)


def _run_main(config, pol, h_m, h_e, power, rb) -> SimReport:
    r_star, fp_diag = fixed_point_rate(pol, config.dist_m, config.dist_e, config.nodes)
    data_rate = (1.0 - config.delta) * r_star
    sched = _bits(data_rate, config.n1)
    # key generation leaves room for the unscaled fixed-point rate
    gen_rate = np.maximum(rb.r_main - r_star - rb.r_eve, 0.0)
    schedule = {
        "fixed_point_rate": r_star,
        "data_rate": data_rate,
        "otp_bits_per_block": sched,
        "r_d_floor": fp_diag.get("r_d_floor", 0.0),
        "backoff": config.delta,
    }
    buffer = KeyBuffer()
    data_rng = config.seed.generator(_DATA_LANE)
    key_rng = config.seed.generator(_KEY_LANE)
    records: list[BlockRecord] = []
    trajectory: list[int] = []
    starvation = 0
    roundtrip_ok = True
    otp_total = otp_insecure = 0
    idx = 0
    for m in range(1, config.b + 1):
        for l in range(1, config.a + 1):
            key_gen = _bits(gen_rate[idx], config.n1)
            consumed = insecure = delivered = 0
            if m == 1:
                if config.init == "insecure":
                    delivered = sched
                    insecure = sched
                    otp_total += sched
                    otp_insecure += sched
            else:
                if buffer.available < sched:
                    starvation += 1
                else:
                    roundtrip_ok &= _encrypt_and_verify(buffer, data_rng, sched)
                    consumed = sched
                    delivered = sched
                    otp_total += sched
            gen_bits = key_rng.integers(0, 2, key_gen, dtype=np.uint8)
            buffer.generate(gen_bits, immediate=False)
            records.append(BlockRecord(
                m=m, l=l, h_m=float(h_m[idx]), h_e=float(h_e[idx]),
                power=float(power[idx]), r_main=float(rb.r_main[idx]),
                r_eve=float(rb.r_eve[idx]), r_s=float(rb.r_s[idx]),
                r_s_prime=float(rb.r_s_prime[idx]),
                r_s_dprime=float(rb.r_s_dprime[idx]),
                key_consumed=consumed, key_generated=key_gen,
                data_delivered=delivered, insecure_bits=insecure,
                outage=False,
            ))
            trajectory.append(buffer.available)
            idx += 1
        # binning codewords decode only once the super-block completes
        buffer.commit_pending()
        trajectory[-1] = buffer.available
    return _assemble(config, records, trajectory, starvation, roundtrip_ok,
                     otp_total, otp_insecure, schedule)


def _run_baseline(config, pol, h_m, h_e, power, rb) -> SimReport:
    records: list[BlockRecord] = []
    trajectory: list[int] = []
    idx = 0
    outages = h_e >= h_m
    for m in range(1, config.b + 1):
        for l in range(1, config.a + 1):
            delivered = _bits(rb.r_s[idx], config.n1)
            records.append(BlockRecord(
                m=m, l=l, h_m=float(h_m[idx]), h_e=float(h_e[idx]),
                power=float(power[idx]), r_main=float(rb.r_main[idx]),
                r_eve=float(rb.r_eve[idx]), r_s=float(rb.r_s[idx]),
                r_s_prime=float(rb.r_s_prime[idx]),
                r_s_dprime=float(rb.r_s_dprime[idx]),
                key_consumed=0, key_generated=0,
                data_delivered=delivered, insecure_bits=0,
                outage=bool(outages[idx]),
            ))
            trajectory.append(0)
            idx += 1
    return _assemble(config, records, trajectory, 0, True, 0, 0,
                     {"per_block_wiretap": True})


def key_balance_check(report: SimReport) -> bool:
    """True iff every super-block m >= 2 consumed no more pad bits than
    super-block m-1 generated (recomputed from the ledger)."""
    if not report.records:
        raise ValueError("empty report: nothing to check")
    b = report.config.b
    gen = [0] * (b + 1)
    cons = [0] * (b + 1)
    for r in report.records:
        gen[r.m] += r.key_generated
        cons[r.m] += r.key_consumed
    return all(cons[m] <= gen[m - 1] for m in range(2, b + 1))
