import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncodlab.errors import EmptyGroup, OneClassOnly
from ncodlab.metrics import FIELDS, EpochRecord, detection_auc, emit_csv, group_mean, read_csv, read_jsonl
from ncodlab.numerics import Rng


def brute_auc(scores, pos):
    p = [s for s, f in zip(scores, pos) if f]
    n = [s for s, f in zip(scores, pos) if not f]
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in itertools.product(p, n)) / (len(p) * len(n))


def test_group_mean_examples():
    assert group_mean([1, 2, 3, 4], [True, True, False, False]) == (1.5, 3.5)
    a, b = group_mean([2.0] * 5, [True, False, True, False, False])
    assert a == b == 2.0


def test_group_mean_two_pass_oracle():
    r = Rng(1)
    v = r.normal(size=101)
    m = r.uniform(101) < 0.3
    t = [x for x, f in zip(v, m) if f]
    f = [x for x, g in zip(v, m) if not g]
    a, b = group_mean(v, m)
    assert a == pytest.approx(sum(t) / len(t), rel=1e-14) and b == pytest.approx(sum(f) / len(f), rel=1e-14)


def test_group_mean_empty():
    with pytest.raises(EmptyGroup):
        group_mean([1, 2], [True, True])
    with pytest.raises(EmptyGroup):
        group_mean([], [])


def test_auc_examples():
    assert detection_auc([3, 4, 1, 2], [True, True, False, False]) == 1.0
    assert detection_auc([0.5] * 6, [True, False] * 3) == 0.5
    assert detection_auc([0.9, 0.1, 0.8, 0.2], [True, False, True, False]) == 1.0
    with pytest.raises(OneClassOnly):
        detection_auc([1, 2], [False, False])


scores_and_labels = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 6).map(float), min_size=n, max_size=n),
    st.lists(st.booleans(), min_size=n, max_size=n)).filter(lambda t: 0 < sum(t[1]) < n))


@given(scores_and_labels)
def test_auc_matches_pairwise_enumeration(case):
    s, p = case
    assert detection_auc(s, p) == pytest.approx(brute_auc(s, p), abs=1e-12)


@given(scores_and_labels)
def test_auc_complement_and_monotone_invariance(case):
    s, p = case
    s, p = np.array(s), np.array(p)
    assert detection_auc(s, p) + detection_auc(s, ~p) == pytest.approx(1.0, abs=1e-12)
    assert detection_auc(np.exp(s) * 3 - 7, p) == pytest.approx(detection_auc(s, p), abs=1e-12)


def _records(n):
    r = Rng(2)
    return [EpochRecord(e, *map(float, r.normal(size=7)), None if e == 0 else float(r.uniform()),
                        float(r.uniform()), float(r.uniform()), None, float(r.uniform()), 1.0 - e / 10)
            for e in range(n)]


def test_csv_empty_report(tmp_path):
    emit_csv([], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == ",".join(FIELDS) + "\n"


def test_csv_roundtrip_exact_and_rectangular(tmp_path):
    recs = _records(5)
    emit_csv(recs, tmp_path / "t.csv")
    assert read_csv(tmp_path / "t.csv") == recs
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len({line.count(",") for line in lines}) == 1


def test_csv_byte_identical(tmp_path):
    emit_csv(_records(4), tmp_path / "a.csv")
    emit_csv(_records(4), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_jsonl_roundtrip(tmp_path):
    recs = _records(3)
    (tmp_path / "t.jsonl").write_text("".join(r.to_json() + "\n" for r in recs))
    assert read_jsonl(tmp_path / "t.jsonl") == recs
