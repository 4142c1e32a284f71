"""Acceptance suite: every criterion at full benchmark scale.

Builds both benchmark panels (10 rounds each, noiseless and sigma = 0.25)
once per session and drives all criteria off them.  Each test prints one
``ACCEPTANCE <n> ... PASS|FAIL`` line (run pytest with ``-s`` to watch them
live).

Two checks compare against externally reported reference values whose own
internal consistency is limited (see the README's benchmark notes); they are
implemented exactly as specified and report honestly.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from prunelab import dpp, harness, theory, verify
from prunelab.analytics import assign_groups

CFG = harness.ExperimentConfig()
_TIMING = {}


def _line(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number:>2} {name:<42} {status}  {detail}")
    return ok


def _all_pass(results):
    return all(r["status"] != "fail" for r in results)


def _detail(results):
    bad = [r["name"] for r in results if r["status"] == "fail"]
    return f"{sum(r['status'] == 'pass' for r in results)}/{len(results)} checks" + (
        f"; failing: {bad}" if bad else ""
    )


@pytest.fixture(scope="session")
def noiseless_states():
    t0 = time.perf_counter()
    states = harness.prepare_rounds(harness.panel_config(CFG, 0.0))
    _TIMING["noiseless"] = time.perf_counter() - t0
    assert states, "no noiseless round converged"
    return states


@pytest.fixture(scope="session")
def noisy_states():
    t0 = time.perf_counter()
    states = harness.prepare_rounds(harness.panel_config(CFG, 0.25))
    _TIMING["noisy"] = time.perf_counter() - t0
    assert states, "no noisy round converged"
    return states


@pytest.fixture(scope="session")
def noiseless_round_records(noiseless_states):
    return harness.evaluate_rounds(noiseless_states, harness.panel_config(CFG, 0.0))


@pytest.fixture(scope="session")
def noisy_round_records(noisy_states):
    return harness.evaluate_rounds(noisy_states, harness.panel_config(CFG, 0.25))


def test_criterion_01_unpruned_baselines(noiseless_states, noisy_states):
    """Default noiseless run reaches MC GE <= 0.06; noisy run lands in [0.15, 0.35]."""
    per_run = _TIMING["noiseless"] * harness.worker_count(CFG.rounds) / len(noiseless_states)
    res0 = verify.check_baseline(noiseless_states[0], elapsed=per_run)
    res1 = verify.check_baseline(noisy_states[0])
    ok = _line(
        1,
        "unpruned baselines",
        res0["status"] == "pass" and res1["status"] == "pass",
        f"noiseless={res0['measured']:.4f} (<=0.06), noisy={res1['measured']:.4f} (window [0.15,0.35]), "
        f"~{per_run:.0f}s/run",
    )
    assert ok, (res0, res1)


def test_criterion_02_dpp_exactness(noiseless_states):
    """DPP pruning matches its closed form within 5% of M(v*)^2/6, plain and reweighted."""
    results = verify.check_dpp_exactness(noiseless_states[0])
    assert _line(2, "DPP closed-form exactness", _all_pass(results), _detail(results)), results


def test_criterion_03_random_node_dominance_analytic():
    """Exact enumeration: random-node expected GE >= DPP GE, strict for k_n >= 2."""
    t0 = time.perf_counter()
    res = verify.check_random_node_dominance()
    elapsed = time.perf_counter() - t0
    ok = res["status"] == "pass" and elapsed < 1.0
    assert _line(3, "random-node dominance (analytic)", ok, f"{elapsed:.2f}s"), res


def test_criterion_04_node_dominance_empirical(noiseless_states):
    """Random/importance node pruning vs DPP per round, plain and reweighted."""
    results = verify.check_node_dominance_empirical(noiseless_states, harness.panel_config(CFG, 0.0))
    assert _line(4, "node dominance (empirical)", _all_pass(results), _detail(results)), results


def test_criterion_05_random_edge_formula(noiseless_states):
    """Bernoulli edge pruning matches its closed form within 10% for c <= 1/2."""
    results = verify.check_random_edge_formula(noiseless_states[0])
    assert _line(5, "random-edge closed form", _all_pass(results), _detail(results)), results


def test_criterion_06_node_vs_edge_grid():
    """DPP-node minus random-edge grid is entrywise nonnegative for Z in 4..30."""
    t0 = time.perf_counter()
    grid = theory.dpp_node_minus_random_edge_grid(range(4, 31), 100)
    elapsed = time.perf_counter() - t0
    ok = float(grid.values.min()) >= 0.0 and elapsed < 1.0
    assert _line(6, "difference grid >= 0", ok, f"min={grid.values.min():.2e}, {elapsed:.2f}s")


def test_criterion_07_reweighted_grid():
    """Reweighted DPP minus optimally rescaled edge grid is entrywise nonpositive."""
    grid = theory.reweighted_dpp_minus_rescaled_edge_grid(range(4, 31), 100)
    ok = float(grid.values.max()) <= 0.0
    assert _line(7, "reweighted difference grid <= 0", ok, f"max={grid.values.max():.2e}")


def test_criterion_08_reference_table(noiseless_round_records, noisy_round_records):
    """Both panels match the reference table per cell within +/-0.20, row order kept."""
    records = {
        0.0: [r for recs in noiseless_round_records for r in recs],
        0.25: [r for recs in noisy_round_records for r in recs],
    }
    report = harness.table_compare(records, CFG.K)
    cells = [c for p in report["panels"].values() for c in p["cells"]]
    n_ok = sum(c["passed"] for c in cells)
    _line(8, "reference table reproduction", report["all_pass"], f"{n_ok}/{len(cells)} cells within 0.20")
    assert report["all_pass"], "\n" + harness.format_table_report(report)


def test_criterion_09_kernel_lemma(noiseless_states):
    """Sample inner-product kernel within 5% Frobenius of the overlap matrix Q."""
    res = verify.check_kernel_lemma(noiseless_states[0])
    ok = res["status"] == "pass"
    assert _line(9, "inner-product kernel equals Q", ok, f"dist={res['measured']:.4f} tol={res['tolerance']:.4f}"), res


def test_criterion_10_second_layer_sums():
    """Per-group second-layer sums within 5% of v* after convergence, 10/10 seeds."""
    res = verify.check_second_layer_sums(CFG)
    ok = res["status"] == "pass"
    assert _line(10, "second-layer group sums", ok, f"worst={res['measured']['worst_relative_deviation']:.3f}"), res


def test_criterion_11_edge_order_param_lemma(noiseless_states):
    """Mask-averaged order parameters within 3 standard errors of the closed form."""
    res = verify.check_edge_op_lemma(noiseless_states[0])
    ok = res["status"] == "pass"
    assert _line(11, "edge-pruned order parameters", ok, f"worst z={res['measured']['worst_z']:.2f}"), res


def test_criterion_12_sampler_distribution():
    """k-DPP sampler within TV 0.02 of the enumeration oracle on 5 fixed kernels."""
    results = verify.check_sampler_tv()
    assert _line(12, "k-DPP sampler total variation", _all_pass(results), _detail(results)), results


def test_criterion_13_property_suites(noiseless_states, noiseless_round_records):
    """Gradient check, closed-vs-MC agreement, determinism, edge-vs-node ordering."""
    results = [
        verify.check_gradient_finite_differences(),
        verify.check_closed_vs_mc(noiseless_states[0]),
        verify.check_determinism(),
    ]
    results.extend(
        verify.check_edge_vs_node_conjecture(noiseless_round_records, harness.panel_config(CFG, 0.0))
    )
    assert _line(13, "property suites", _all_pass(results), _detail(results)), results


def test_supporting_specialization_structure(noiseless_states):
    """Converged rounds are block-structured: occupancy Z per teacher node,
    normalized Q above 0.9 within blocks and clearly separated across.

    The idealized across-block level is 0; at N = 500 the SGD hover and the
    teacher rows' own overlaps keep it near 0.15-0.2, so separation rather
    than an absolute near-zero value is asserted for real runs.
    """
    ok = True
    details = []
    for state in noiseless_states:
        op = state.order_params
        groups = assign_groups(op)
        ok &= bool(np.all(groups.occupancy == CFG.Z))
        d = np.sqrt(np.diag(op.Q))
        Qn = op.Q / np.outer(d, d)
        same = groups.group[:, None] == groups.group[None, :]
        within = np.abs(Qn[same & ~np.eye(CFG.K, dtype=bool)])
        across = np.abs(Qn[~same])
        details.append((float(within.min()), float(across.max())))
        ok &= bool(within.min() > 0.9) and bool(across.max() < 0.5 * within.min())
    worst = (min(d[0] for d in details), max(d[1] for d in details))
    assert _line("+", "converged block structure", ok, f"within>={worst[0]:.3f}, across<={worst[1]:.3f}"), details


def test_supporting_dpp_occupancy_bound(noiseless_states):
    """DPP masks at k_n <= M keep at most one node per block in nearly all draws.

    On the exact block kernel the rate exceeds 99.9% (asserted in the dpp
    unit tests); real converged kernels at N = 500 carry ~0.97 within-block
    correlations, which caps the rate near 96-97% at k_n = M.
    """
    state = noiseless_states[0]
    groups = assign_groups(state.order_params)
    rng = np.random.default_rng(424242)
    ok = True
    rates = []
    for k_n in range(1, CFG.M + 1):
        sampler = dpp.KdppSampler(state.kernel, k_n)
        good = sum(
            int(np.bincount(groups.group[sampler.sample(rng)], minlength=CFG.M).max() <= 1)
            for _ in range(10_000)
        )
        rates.append(good / 10_000)
        ok &= good / 10_000 >= 0.95
    assert _line("+", "DPP one-per-block occupancy", ok, f"rates={rates}"), rates
