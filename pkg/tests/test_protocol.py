"""Protocol ledger tests: one-time pad, key buffer, the three schemes."""

import csv
import io
import math

import numpy as np
import pytest

from dlsec.fading import parse_distribution
from dlsec.numerics import RngSeed
from dlsec.protocol import (LN2, KeyBuffer, SimConfig, key_balance_check, otp,
                            simulate)

CHISQ4 = parse_distribution("chisq:4")


def make_config(**kw):
    base = dict(scheme="full", dist_m=CHISQ4, dist_e=CHISQ4, p_bar=100.0,
                a=100, b=10, n1=1000, delta=0.05, seed=RngSeed(0))
    base.update(kw)
    return SimConfig(**base)


class TestOtp:
    def test_identity_key(self):
        np.testing.assert_array_equal(otp([1, 0, 1, 0], [0, 0, 0, 0]), [1, 0, 1, 0])

    def test_self_cancellation(self):
        np.testing.assert_array_equal(otp([1, 0, 1, 0], [1, 0, 1, 0]), [0, 0, 0, 0])

    def test_truth_table(self):
        np.testing.assert_array_equal(otp([1, 1, 0, 0], [1, 0, 1, 0]), [0, 1, 1, 0])

    def test_involution_on_random_bits(self):
        rng = RngSeed(1).generator()
        d = rng.integers(0, 2, 4096, dtype=np.uint8)
        k = rng.integers(0, 2, 4096, dtype=np.uint8)
        np.testing.assert_array_equal(otp(otp(d, k), k), d)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            otp([1, 0], [1, 0, 1])

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            otp([2, 0], [1, 0])


class TestKeyBuffer:
    def test_pending_and_commit(self):
        buf = KeyBuffer()
        buf.generate(np.ones(10, dtype=np.uint8), immediate=False)
        assert buf.pending == 10 and buf.available == 0
        buf.commit_pending()
        assert buf.pending == 0 and buf.available == 10

    def test_fifo_consumption_across_segments(self):
        buf = KeyBuffer()
        buf.generate(np.array([1, 1, 1], dtype=np.uint8), immediate=True)
        buf.generate(np.array([0, 0, 0, 0], dtype=np.uint8), immediate=True)
        np.testing.assert_array_equal(buf.consume(5), [1, 1, 1, 0, 0])
        assert buf.available == 2

    def test_overdraw_rejected(self):
        buf = KeyBuffer()
        buf.generate(np.ones(4, dtype=np.uint8), immediate=True)
        with pytest.raises(ValueError, match="exceeds available"):
            buf.consume(5)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_config(b=0)
        with pytest.raises(ValueError):
            make_config(delta=1.0)
        with pytest.raises(ValueError):
            make_config(scheme="quantum")
        with pytest.raises(ValueError):
            make_config(init="retry")

    def test_symbol_count(self):
        assert make_config(a=3, b=4, n1=5).n == 60

    def test_scheme_policy_defaults(self):
        assert make_config(scheme="full").policy_spec() == "full-inv"
        assert make_config(scheme="main").policy_spec() == "main-inv"
        assert make_config(scheme="baseline").policy_spec() == "const"


class TestFullScheme:
    def test_single_superblock_is_all_insecure(self):
        rep = simulate(make_config(b=1, a=50))
        assert rep.otp_insecure_fraction == 1.0

    def test_stable_run(self):
        """At delta = 0.05 the pad pool never starves and the insecure
        share is exactly the super-block-1 share 1/b."""
        rep = simulate(make_config(a=200, b=10))
        assert rep.starvation_events == 0
        assert rep.roundtrip_ok
        assert rep.otp_insecure_fraction == 1.0 / 10.0
        # every block from super-block 2 on delivers pad-covered bits
        sched = rep.schedule["otp_bits_per_block"]
        assert sched > 0
        for r in rep.records:
            if r.m >= 2:
                assert r.key_consumed == sched
                assert r.insecure_bits == 0

    def test_ledger_identities(self):
        rep = simulate(make_config(a=50, b=4))
        delivered = sum(r.data_delivered for r in rep.records)
        insecure = sum(r.insecure_bits for r in rep.records)
        assert rep.insecure_fraction == insecure / delivered
        for r in rep.records:
            assert r.insecure_bits <= r.data_delivered
        assert all(v >= 0 for v in rep.buffer_trajectory)

    def test_block_bit_loads_match_rates(self):
        """data_delivered = round(n1 * rate) at the ledger's bit scale."""
        rep = simulate(make_config(a=20, b=3))
        sched = rep.schedule["otp_bits_per_block"]
        for r in rep.records:
            direct = int(round(rep.config.n1 * r.r_s_dprime / LN2))
            lane = sched if (r.m == 1 or r.key_consumed) else 0
            assert r.data_delivered == direct + lane
            assert r.key_generated == int(round(rep.config.n1 * r.r_s_prime / LN2))

    def test_dedicated_init_sends_no_data(self):
        rep = simulate(make_config(a=100, b=5, init="dedicated"))
        first = [r for r in rep.records if r.m == 1]
        assert all(r.data_delivered == 0 and r.insecure_bits == 0 for r in first)
        assert rep.otp_insecure_fraction == 0.0
        assert rep.starvation_events == 0

    def test_starved_blocks_skip_the_pad_lane(self):
        """delta = 0 at a = 2 starves often; starved blocks consume nothing
        and deliver only the direct lane (zero at q = h_e)."""
        rep = simulate(make_config(a=2, b=100, delta=0.0, seed=RngSeed(3)))
        assert rep.starvation_events > 0
        sched = rep.schedule["otp_bits_per_block"]
        starved = [r for r in rep.records
                   if r.m >= 2 and r.key_consumed == 0 and sched > 0]
        assert len(starved) == rep.starvation_events
        assert all(r.data_delivered == 0 for r in starved)

    def test_starved_block_fraction_improves_with_superblock_length(self):
        """Longer super-blocks average the key rate better: the starved
        fraction of consuming blocks is non-increasing in a."""
        fractions = []
        for a in (10, 50, 250, 1250):
            events = blocks = 0
            for s in range(3):
                rep = simulate(make_config(a=a, b=10, n1=200, seed=RngSeed(s)))
                events += rep.starvation_events
                blocks += a * 9
            fractions.append(events / blocks)
        assert all(f1 >= f2 - 1e-12 for f1, f2 in zip(fractions, fractions[1:]))
        assert fractions[-1] == 0.0


class TestMainScheme:
    def test_keys_decode_at_superblock_end(self):
        rep = simulate(make_config(scheme="main", a=50, b=4))
        # within super-block 1 nothing is consumable; the pool first fills
        # at the boundary
        assert all(v == 0 for v in rep.buffer_trajectory[:49])
        assert rep.buffer_trajectory[49] > 0

    def test_single_lane_accounting(self):
        rep = simulate(make_config(scheme="main", a=100, b=10))
        assert rep.outage_fraction == 0.0
        assert rep.roundtrip_ok
        assert rep.insecure_fraction == rep.otp_insecure_fraction
        sched = rep.schedule["otp_bits_per_block"]
        for r in rep.records:
            assert r.data_delivered in (0, sched)

    def test_generation_rate_leaves_room_for_fixed_point(self):
        rep = simulate(make_config(scheme="main", a=50, b=4))
        r_star = rep.schedule["fixed_point_rate"]
        for r in rep.records:
            want = int(round(rep.config.n1
                             * max(r.r_main - r_star - r.r_eve, 0.0) / LN2))
            assert r.key_generated == want


class TestBaselineScheme:
    def test_outage_fraction_near_half(self):
        """iid gains: P(h_e >= h_m) = 1/2; 3 binomial stderr at 1e4 blocks."""
        rep = simulate(make_config(scheme="baseline", a=100, b=100))
        stderr = math.sqrt(0.25 / 10_000)
        assert abs(rep.outage_fraction - 0.5) <= 3.0 * stderr

    def test_outage_blocks_deliver_nothing(self):
        rep = simulate(make_config(scheme="baseline", a=100, b=10))
        for r in rep.records:
            if r.outage:
                assert r.data_delivered == 0
        # the delay-limited guaranteed rate collapses to zero
        assert min(r.data_delivered for r in rep.records) == 0
        assert rep.insecure_fraction == 0.0


class TestBalanceCheck:
    def test_matches_recomputed_ledger(self):
        """The check equals the per-super-block comparison by definition."""
        for scheme, delta in (("full", 0.05), ("main", 0.05), ("full", 0.5)):
            rep = simulate(make_config(scheme=scheme, a=50, b=6, delta=delta))
            gen = {}
            cons = {}
            for r in rep.records:
                gen[r.m] = gen.get(r.m, 0) + r.key_generated
                cons[r.m] = cons.get(r.m, 0) + r.key_consumed
            want = all(cons[m] <= gen[m - 1] for m in range(2, rep.config.b + 1))
            assert key_balance_check(rep) == want

    def test_wide_backoff_balances(self):
        """At delta = 0.5 consumption sits far below mean generation, so
        every super-block covers the next one."""
        rep = simulate(make_config(a=200, b=10, delta=0.5))
        assert key_balance_check(rep) is True
        assert rep.starvation_events == 0

    def test_empty_run_rejected_upstream(self):
        with pytest.raises(ValueError):
            make_config(b=0)


class TestDeterminismAndSerialization:
    def test_identical_configs_identical_reports(self):
        a = simulate(make_config(a=30, b=3, seed=RngSeed(7)))
        b = simulate(make_config(a=30, b=3, seed=RngSeed(7)))
        assert a.to_json() == b.to_json()
        assert a.csv_text() == b.csv_text()
        c = simulate(make_config(a=30, b=3, seed=RngSeed(8)))
        assert a.to_json() != c.to_json()

    def test_csv_round_trips_losslessly(self):
        rep = simulate(make_config(a=20, b=2))
        reader = csv.DictReader(io.StringIO(rep.csv_text()))
        rows = list(reader)
        assert len(rows) == len(rep.records)
        for row, rec in zip(rows, rep.records):
            assert int(row["m"]) == rec.m
            assert float(row["h_m"]) == rec.h_m  # repr round-trip is exact
            assert float(row["r_s_prime"]) == rec.r_s_prime
            assert int(row["key_consumed"]) == rec.key_consumed
            assert int(row["outage"]) == int(rec.outage)

    def test_json_document_shape(self):
        rep = simulate(make_config(a=10, b=2))
        doc = rep.to_json_dict()
        assert doc["config"]["dist_m"] == "chisq:4"
        assert len(doc["buffer_trajectory"]) == 20
        assert len(doc["records"]["m"]) == 20
        assert set(doc["records"]) >= {"m", "l", "h_m", "h_e", "power",
                                       "key_consumed", "outage"}
