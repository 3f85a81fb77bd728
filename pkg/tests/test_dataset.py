import json

import numpy as np
import pytest

import framelab.dataset as ds
from framelab.dataset import (
    DatasetConfig,
    DatasetError,
    generate_dataset,
    load_dataset,
    sample_loads,
    save_dataset,
    split_dataset,
)
from framelab.fem import count_yielded, solve_nonlinear
from framelab.frame import LoadCase, build_reference_frame


@pytest.fixture(scope="module")
def frame():
    return build_reference_frame()


@pytest.fixture(scope="module")
def records(frame):
    return generate_dataset(frame, DatasetConfig(n_cases=80, seed=3))


def test_sample_loads_ranges():
    config = DatasetConfig(n_cases=300, seed=1)
    lin_lo, lin_hi = config.linear_range
    nl_lo, nl_hi = config.nonlinear_range
    for lc in sample_loads(config):
        in_linear = lin_lo <= lc.f_mid <= lin_hi and lin_lo <= lc.f_top <= lin_hi
        in_nonlinear = nl_lo <= lc.f_mid <= nl_hi and nl_lo <= lc.f_top <= nl_hi
        assert in_linear or in_nonlinear


def test_sample_loads_mix_fraction():
    config = DatasetConfig(n_cases=1000, seed=1)
    n_linear = sum(
        1 for lc in sample_loads(config) if lc.f_mid <= config.linear_range[1]
    )
    assert 540 <= n_linear <= 660  # ~0.6 of 1000


def test_sampling_is_deterministic():
    config = DatasetConfig(n_cases=50, seed=9)
    assert sample_loads(config) == sample_loads(config)


def test_sampling_substreams_are_order_independent():
    a = DatasetConfig(n_cases=30, seed=9)
    b = DatasetConfig(n_cases=50, seed=9)
    assert sample_loads(a) == sample_loads(b)[:30]


def test_generated_records_have_fem_targets(frame, records):
    assert len(records) == 80
    for rec in records:
        assert rec.regime in ("linear", "nonlinear")
        assert rec.targets.shape == (6, 3)
        # fixed nodes carry exactly zero targets
        assert np.all(rec.targets[0] == 0.0)
        assert np.all(rec.targets[3] == 0.0)


def test_linear_labels_mean_zero_hinges(frame, records):
    linear = [r for r in records if r.regime == "linear"]
    rng = np.random.default_rng(0)
    for rec in rng.choice(len(linear), size=min(10, len(linear)), replace=False):
        r = linear[int(rec)]
        _, states, _ = solve_nonlinear(frame, r.load_case, n_steps=12)
        assert count_yielded(states) == 0


def test_nonlinear_labels_mean_hinges(frame, records):
    nonlinear = [r for r in records if r.regime == "nonlinear"]
    assert nonlinear, "expected some nonlinear cases in an 80-case draw"
    for r in nonlinear[:5]:
        _, states, _ = solve_nonlinear(frame, r.load_case, n_steps=12)
        assert count_yielded(states) >= 1


def test_zero_load_case_labels_linear(frame, monkeypatch):
    monkeypatch.setattr(ds, "sample_loads", lambda config: [LoadCase(0.0, 0.0)])
    recs = generate_dataset(frame, DatasetConfig(n_cases=1, seed=0))
    assert len(recs) == 1
    assert recs[0].regime == "linear"
    assert np.all(recs[0].targets == 0.0)


def test_generation_is_reproducible(frame):
    config = DatasetConfig(n_cases=20, seed=5)
    one = generate_dataset(frame, config)
    two = generate_dataset(frame, config)
    for a, b in zip(one, two):
        assert a.case_id == b.case_id
        assert a.f_mid == b.f_mid and a.f_top == b.f_top
        assert a.regime == b.regime
        assert np.array_equal(a.targets, b.targets)


def test_split_500_at_85(frame):
    config = DatasetConfig(n_cases=500, seed=2)
    recs = generate_dataset(frame, config)
    train, test = split_dataset(recs, 0.85, seed=2)
    assert len(train) == 425
    assert len(test) == 75
    assert {r.case_id for r in train}.isdisjoint({r.case_id for r in test})


def test_split_is_stratified(records):
    train, test = split_dataset(records, 0.85, seed=4)
    whole = sum(r.regime == "linear" for r in records) / len(records)
    got = sum(r.regime == "linear" for r in train) / len(train)
    # stratification keeps the mix within a couple of cases
    assert abs(got * len(train) - whole * len(train)) <= 2


def test_split_two_records():
    recs = [r for r in _tiny_records()]
    train, test = split_dataset(recs[:2], 0.5, seed=0)
    assert len(train) == 1 and len(test) == 1


def _tiny_records():
    ids = (1, 2, 3, 4, 5, 6)
    return [
        ds.CaseRecord(i, 1e5 + i, 2e5, "linear", ids, np.full((6, 3), float(i)))
        for i in range(4)
    ]


def test_split_determinism(records):
    t1, s1 = split_dataset(records, 0.85, seed=11)
    t2, s2 = split_dataset(records, 0.85, seed=11)
    assert [r.case_id for r in t1] == [r.case_id for r in t2]
    assert [r.case_id for r in s1] == [r.case_id for r in s2]


def test_split_rejects_bad_inputs(records):
    with pytest.raises(DatasetError):
        split_dataset(records[:1], 0.85, seed=0)
    with pytest.raises(DatasetError):
        split_dataset(records, 1.0, seed=0)


def test_save_load_round_trip(tmp_path, records):
    path = tmp_path / "data.jsonl"
    save_dataset(records, str(path))
    again = load_dataset(str(path))
    assert len(again) == len(records)
    for a, b in zip(records, again):
        assert a.case_id == b.case_id
        assert a.f_mid == b.f_mid and a.f_top == b.f_top
        assert a.regime == b.regime
        assert a.node_ids == b.node_ids
        assert np.array_equal(a.targets, b.targets)


def test_load_reports_missing_field_with_line(tmp_path, records):
    path = tmp_path / "data.jsonl"
    save_dataset(records[:3], str(path))
    lines = path.read_text().splitlines()
    obj = json.loads(lines[2])
    del obj["regime"]
    lines[2] = json.dumps(obj)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError, match="line 3.*regime"):
        load_dataset(str(path))


def test_load_rejects_newer_schema(tmp_path, records):
    path = tmp_path / "data.jsonl"
    save_dataset(records[:2], str(path))
    lines = path.read_text().splitlines()
    obj = json.loads(lines[1])
    obj["schema_version"] = 99
    lines[1] = json.dumps(obj)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError, match="version 99"):
        load_dataset(str(path))


def test_load_reports_malformed_json_line(tmp_path, records):
    path = tmp_path / "data.jsonl"
    save_dataset(records[:2], str(path))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(DatasetError, match="line 4"):
        load_dataset(str(path))


def test_config_validation():
    with pytest.raises(DatasetError):
        DatasetConfig(linear_range=(2e5, 1e5))
    with pytest.raises(DatasetError):
        DatasetConfig(linear_fraction=1.5)
    with pytest.raises(DatasetError):
        DatasetConfig(split_fraction=0.0)
    with pytest.raises(DatasetError):
        DatasetConfig(n_cases=0)
