import itertools
import json
import random

import numpy as np
import pytest

from moose_ifs.bench import (
    FAMILIES,
    TIERS,
    CaseFormatError,
    CaseResult,
    IdMismatch,
    compare,
    format_summary_table,
    hard_subset,
    load_cases,
    paired_delta,
    run_batch,
    score_case,
    sha256_manifest,
    summarize,
)
from moose_ifs.stats import Degenerate, average_ranks, bootstrap_ci, wilcoxon_signed_rank

from support import golden, golden_input


def _case(case_id):
    return next(c for c in golden() if c.id == case_id)


def _res(case_id, ifs, **kw):
    return CaseResult(case_id, ifs, kw.pop("mcs", 1.0), False, kw.pop("sub_scores", {}), **kw)


# --- corpus and scoring ------------------------------------------------------


def test_golden_corpus_spans_families_and_tiers():
    cases = golden()
    assert len(cases) >= 15
    assert {c.family for c in cases} == set(FAMILIES)
    assert {c.tier for c in cases} == set(TIERS)
    assert all(c.reference_input.exists() for c in cases)


@pytest.mark.parametrize("case", golden(), ids=lambda c: c.id)
def test_reference_input_scores_one(case):
    r = score_case(case, golden_input(case))
    assert r.ifs == 1.0 and not r.parse_failed


def test_unparseable_candidate_scores_zero():
    r = score_case(_case("diffusion_004"), "[Kernels\n  oops")
    assert r.ifs == 0.0 and r.parse_failed
    assert r.error.startswith("parse error")


def test_fixing_bc_and_scheme_raises_score():
    case = _case("diffusion_004")
    good = golden_input(case)
    start = good.index("  [influx]")
    end = good.index("  []\n", start) + len("  []\n")
    broken = (good[:start] + good[end:]).replace("type = Transient", "type = Steady")
    assert score_case(case, broken).ifs < score_case(case, good).ifs


def test_load_cases_errors(tmp_path):
    line = json.dumps({"id": "a", "gt_contract": {}, "tier": "simple"})
    p = tmp_path / "cases.jsonl"
    p.write_text(line + "\n" + line + "\n")
    with pytest.raises(CaseFormatError, match="duplicate"):
        load_cases(p)
    p.write_text(json.dumps({"id": "a", "gt_contract": {}, "tier": "legendary"}) + "\n")
    with pytest.raises(CaseFormatError):
        load_cases(p)
    p.write_text("{not json\n")
    with pytest.raises(CaseFormatError, match=":1:"):
        load_cases(p)


def test_run_batch(tmp_path):
    cases = [_case("thermal_001"), _case("diffusion_004"), _case("darcy_003")]
    (tmp_path / "thermal_001.i").write_text(golden_input(cases[0]))
    (tmp_path / "diffusion_004.i").write_text("[Oops\n")
    results = run_batch(cases, tmp_path)
    assert [r.id for r in results] == ["darcy_003", "diffusion_004", "thermal_001"]
    by_id = {r.id: r for r in results}
    assert by_id["thermal_001"].ifs == 1.0
    assert by_id["diffusion_004"].parse_failed
    assert by_id["darcy_003"].ifs == 0.0 and "missing candidate" in by_id["darcy_003"].error
    assert run_batch(list(reversed(cases)), tmp_path, jobs=2) == results


def test_sub_scores_aggregate_checkpoints():
    case = _case("diffusion_004")
    r = score_case(case, golden_input(case).replace("type = Transient", "type = Steady"))
    assert r.sub_scores["time"] == 0.0
    assert r.sub_scores["term"] == 1.0


# --- paired comparisons ------------------------------------------------------


def test_paired_delta():
    a = [_res("x", 0.5), _res("y", 0.7), _res("z", 0.9)]
    b = [_res("z", 1.0), _res("x", 0.8), _res("y", 0.7)]
    assert paired_delta(a, a) == 0.0
    assert paired_delta(a, b) == pytest.approx((0.3 + 0.0 + 0.1) / 3)
    assert paired_delta(list(reversed(a)), b) == paired_delta(a, b)


def test_paired_delta_requires_equal_ids():
    with pytest.raises(IdMismatch):
        paired_delta([_res("x", 0.5)], [_res("y", 0.5)])
    with pytest.raises(IdMismatch):
        paired_delta([_res("x", 0.5), _res("x", 0.6)], [_res("x", 0.5)])


def test_compare():
    a = [_res(f"c{i}", 0.5) for i in range(8)]
    b = [_res(f"c{i}", 0.5 + 0.05 * (i + 1)) for i in range(8)]
    out = compare(a, b)
    assert out["mean_delta"] == pytest.approx(0.225)
    assert out["wilcoxon"]["W"] == 0 and out["wilcoxon"]["p"] == pytest.approx(2 / 256)
    assert compare(a, a)["wilcoxon"] is None


def test_hard_subset():
    rs = [_res("a", 0.2), _res("b", 0.69), _res("c", 0.7), _res("d", 1.0)]
    assert hard_subset(rs, 0.0) == set()
    assert hard_subset(rs, 1.01) == {"a", "b", "c", "d"}
    assert hard_subset(rs) == {"a", "b"}


# --- statistics -------------------------------------------------------------


def test_average_ranks():
    assert average_ranks([3.0, 1.0, 3.0, 2.0]) == [3.5, 1.0, 3.5, 2.0]


def test_wilcoxon_degenerate():
    with pytest.raises(Degenerate):
        wilcoxon_signed_rank([0.0, 0.0])
    with pytest.raises(Degenerate):
        wilcoxon_signed_rank([])


def test_wilcoxon_reference_sample():
    # Darwin's Zea mays height differences, a standard worked example
    d = [6, 8, 14, 16, 23, 24, 28, 29, 41, -48, 49, 56, 60, -67, 75]
    r = wilcoxon_signed_rank(d)
    assert r.W == 24
    assert r.p == pytest.approx(0.041259765625, abs=1e-12)


def _enumerated_p(d):
    d = [x for x in d if x != 0]
    ranks = average_ranks([abs(x) for x in d])
    w_plus = sum(r for r, x in zip(ranks, d) if x > 0)
    obs = min(w_plus, sum(ranks) - w_plus)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        wp = sum(r for r, s in zip(ranks, signs) if s)
        hits += min(wp, sum(ranks) - wp) <= obs + 1e-9
    return hits / 2 ** len(d)


def test_wilcoxon_matches_enumeration():
    rng = random.Random(3)
    for _ in range(40):
        n = rng.randint(1, 12)
        d = [rng.choice([-1, 1]) * rng.choice([0.5, 1.0, 1.5, 2.0, 3.0, rng.random()]) for _ in range(n)]
        assert wilcoxon_signed_rank(d).p == pytest.approx(_enumerated_p(d), abs=1e-12)


def test_wilcoxon_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(11)
    for n in (5, 10, 20, 40, 80):
        d = rng.normal(0.1, 1.0, n).round(6)
        ours = wilcoxon_signed_rank(d)
        ref = scipy_stats.wilcoxon(d, method="exact" if n <= 25 else "approx", correction=False)
        assert ours.W == pytest.approx(ref.statistic)
        assert ours.p == pytest.approx(ref.pvalue, rel=1e-9)


def test_bootstrap():
    lo, hi = bootstrap_ci([0.4] * 20)
    assert hi - lo == 0.0 and lo == pytest.approx(0.4)
    x = list(np.random.default_rng(0).random(30))
    assert bootstrap_ci(x, seed=5) == bootstrap_ci(x, seed=5)
    lo, hi = bootstrap_ci(x)
    assert lo < float(np.mean(x)) < hi
    rng = np.random.default_rng(1)
    widths = []
    for n in (200, 50, 10):
        lo, hi = bootstrap_ci(rng.random(n), seed=0)
        widths.append(hi - lo)
    assert widths[0] < widths[1] < widths[2]
    with pytest.raises(ValueError):
        bootstrap_ci([])


# --- summaries ---------------------------------------------------------------


def test_summarize_and_table():
    rs = [
        _res("a", 1.0, family="steady_heat", tier="simple", sub_scores={"term": 1.0, "bc": None}),
        _res("b", 0.5, family="steady_heat", tier="medium", sub_scores={"term": 0.5, "bc": 1.0}),
        _res("c", 0.6, family="plasticity", tier="complex", mcs="undefined", sub_scores={"term": 0.0}),
    ]
    s = summarize(rs, resamples=500)
    assert s["n"] == 3
    assert s["mean_ifs"] == pytest.approx(0.7)
    assert s["mean_mcs"] == 1.0
    assert s["hard_subset"] == ["b", "c"]
    assert s["per_family"]["steady_heat"] == {"n": 2, "mean_ifs": 0.75}
    assert s["sub_scores"] == {"term": 0.5, "bc": 1.0}
    table = format_summary_table(s)
    assert "mean IFS: 0.700" in table and "plasticity" in table
    assert format_summary_table(summarize([])) == "cases: 0  parse failures: 0\n"


def test_sha256_manifest(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("abc")
    assert sha256_manifest([p]) == f"ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  {p}\n"
