import logging

import numpy as np
import pytest

from oracles import tally
from stegochannel.bench import (DEFAULT_SIZES, RECORD_FIELDS, Carrier, SuccessRecord, curve, derive_seed,
                                make_payload, plot_curves, read_records, read_summary, records_csv,
                                run_experiment, run_trial, smoke_test, summarize, summary_csv)
from stegochannel.channel import ChannelProfile
from stegochannel.errors import EmptyRecords
from stegochannel.jpeg import CoefficientImage, Component, QuantTable
from stegochannel.stego import EmbedSpec, Outcome, capacity

SPEC = EmbedSpec("bench", 1)


def record(outcome, size=65, cls=960, kind="text", cid="c0", trial=0):
    return SuccessRecord(cid, cls, kind, size, outcome, 0, trial)


@pytest.fixture(scope="module")
def bench_carriers(prepared):
    return [Carrier(name, 960, img) for name, img in prepared[:2]]


def fixture_records():
    """20 records over two cells with a known mix of outcomes."""
    rng = np.random.default_rng(8)
    outcomes = list(Outcome)
    return [record(outcomes[rng.integers(len(outcomes))], size=(65, 400)[i % 2], cid=f"c{i % 3}", trial=i)
            for i in range(20)]


def test_all_intact_is_one():
    assert summarize([record(Outcome.INTACT)] * 4)[0].success_rate == 1.0


def test_nine_of_ten():
    rows = summarize([record(Outcome.INTACT)] * 9 + [record(Outcome.CORRUPTED)])
    assert rows[0].success_rate == 0.9 and rows[0].corrupted == 1


def test_matches_hand_tally():
    records = fixture_records()
    expected = tally(records)
    rows = summarize(records)
    assert {(r.resolution_class, r.payload_kind, r.payload_bytes): (r.intact, r.trials) for r in rows} == expected
    for r in rows:
        assert r.intact + r.corrupted + r.mismatch + r.refused == r.trials


def test_corrupted_never_counts():
    assert not record(Outcome.CORRUPTED).success
    assert summarize([record(Outcome.CORRUPTED)] * 3)[0].success_rate == 0.0


def test_empty_records():
    with pytest.raises(EmptyRecords):
        summarize([])


def test_payloads():
    assert make_payload("text", 400, 1) == make_payload("text", 400, 1)
    assert make_payload("text", 400, 1) != make_payload("text", 400, 2)
    assert len(make_payload("text", 12288, 0)) == 12288
    image = make_payload("image", 5120, 0)
    assert len(image) == 5120 and image.startswith(b"\xff\xd8")
    assert make_payload("image", 0, 0) == b""
    with pytest.raises(ValueError):
        make_payload("audio", 1, 0)


def test_derive_seed_stable():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
    assert 0 <= derive_seed(0) < 2**63


def test_zero_byte_payload_intact(bench_carriers):
    profile = ChannelProfile(quality_jitter=2)
    for c in bench_carriers:
        assert run_trial(c, profile, EmbedSpec("z", 1, reference_quality=75, quality_tolerance=2),
                         "text", 0, 0, 0).outcome is Outcome.INTACT


def test_transparent_channel(bench_carriers):
    spec = EmbedSpec("t", 1, reference_quality=75)
    caps = {c.carrier_id: capacity(c.image, spec) for c in bench_carriers}
    records = run_experiment(bench_carriers, ChannelProfile(), [1, 65, 1024, 3072, 5120], spec, 1)
    for r in records:
        fits = r.payload_bytes <= caps[r.carrier_id]
        assert r.outcome is (Outcome.INTACT if fits else Outcome.REFUSED)


def test_refused_when_too_large(bench_carriers):
    r = run_trial(bench_carriers[0], ChannelProfile(), SPEC, "text", 10**6, 0, 0)
    assert r.outcome is Outcome.REFUSED


def test_experiment_accounting_and_determinism(bench_carriers):
    profile = ChannelProfile(quality_jitter=2)
    sizes = [65, 700, 5120]
    a = run_experiment(bench_carriers, profile, sizes, SPEC, 2, seed=3)
    assert len(a) == len(bench_carriers) * len(sizes) * 2
    b = run_experiment(bench_carriers, profile, sizes, SPEC, 2, seed=3)
    assert records_csv(a) == records_csv(b)
    # all sizes of one (carrier, trial) share a channel draw
    seeds = {(r.carrier_id, r.trial): set() for r in a}
    for r in a:
        seeds[(r.carrier_id, r.trial)].add(r.channel_seed)
    assert all(len(s) == 1 for s in seeds.values())


def test_parallel_matches_serial(bench_carriers):
    profile = ChannelProfile(quality_jitter=1)
    serial = run_experiment(bench_carriers, profile, [65, 400], SPEC, 2, seed=5)
    parallel = run_experiment(bench_carriers, profile, [65, 400], SPEC, 2, seed=5, jobs=2)
    assert records_csv(serial) == records_csv(parallel)


def test_smoke_failures_excluded(bench_carriers, caplog):
    blank = CoefficientImage(16, 16, (Component(1, 1, 1, 0, np.zeros((2, 2, 8, 8))),), {0: QuantTable((1,) * 64)})
    tiny = Carrier("blank", 960, blank)
    assert not smoke_test(tiny, ChannelProfile(), SPEC)
    with caplog.at_level(logging.WARNING):
        records = run_experiment([tiny] + bench_carriers[:1], ChannelProfile(), [1], SPEC, 1)
    assert {r.carrier_id for r in records} == {bench_carriers[0].carrier_id}
    assert "blank" in caplog.text


def test_bad_trials(bench_carriers):
    with pytest.raises(ValueError):
        run_experiment(bench_carriers, ChannelProfile(), [1], SPEC, 0)


def test_csv_round_trip(tmp_path):
    records = fixture_records()
    records_csv(records, tmp_path / "r.csv")
    assert read_records(tmp_path / "r.csv") == records
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == ",".join(RECORD_FIELDS)
    table = summarize(records)
    summary_csv(table, tmp_path / "s.csv")
    assert read_summary(tmp_path / "s.csv") == table


def test_curve_gap_and_monotone():
    rows = summarize([record(Outcome.INTACT, size=65)] * 2 + [record(Outcome.INTACT, size=400),
                      record(Outcome.MISMATCH, size=400), record(Outcome.MISMATCH, size=3072)])
    sizes, rates = curve(rows, 960, "text", [65, 400, 1024, 3072])
    assert list(sizes) == [65, 400, 1024, 3072]
    assert rates[0] == 1.0 and rates[1] == 0.5 and np.isnan(rates[2]) and rates[3] == 0.0
    _, observed = curve(rows, 960, "text")
    assert np.all(np.diff(observed) <= 0)


def test_plots_byte_stable(tmp_path):
    table = summarize(fixture_records() + [record(Outcome.INTACT, cls=2048, kind="image", size=s)
                                           for s in DEFAULT_SIZES[:3]])
    first = plot_curves(table, tmp_path / "a")
    second = plot_curves(table, tmp_path / "b")
    assert sorted(p.name for p in first) == ["fig_2048_image.png", "fig_960_text.png"]
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes()
        assert p.read_bytes().startswith(b"\x89PNG")
