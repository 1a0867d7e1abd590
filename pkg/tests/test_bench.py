import numpy as np
import pytest

import mpls.bench as bench
from mpls import (
    Combo,
    ExperimentPlan,
    MetricRow,
    median_auc_exemplar,
    benchmark_plan,
    run_experiment,
    pooled_summary,
)


def _tiny_plan(**overrides):
    base = dict(
        p=151,
        n_values=(40,),
        combos=(Combo("lasso_amnr", "lasso"),),
        repetitions=2,
        seed_base=0,
        grid_count=5,
        mnr_max_iter=25,
    )
    base.update(overrides)
    return ExperimentPlan(**base)


# --- plan and combo validation ---


def test_combo_validation():
    with pytest.raises(ValueError):
        Combo("a", "kalman")
    with pytest.raises(ValueError):
        Combo("a", "nng")  # garrote needs a reference combo
    with pytest.raises(ValueError):
        Combo("a", "slasso")  # smooth kinds need lambda_sm candidates
    with pytest.raises(ValueError):
        Combo("a", "slasso", lambda_sm=(-1.0,))
    assert Combo("a", "lasso").algorithm == "amnr"
    assert Combo("b", "ridge_i").algorithm == "closed_form"
    assert Combo("c", "fnlasso").algorithm == "mnr"


def test_plan_rejects_duplicate_names():
    with pytest.raises(ValueError):
        _tiny_plan(combos=(Combo("x", "lasso"), Combo("x", "ridge_i")))


def test_plan_rejects_forward_reference():
    with pytest.raises(ValueError):
        _tiny_plan(combos=(Combo("g", "nng", reference="ref"), Combo("ref", "ols")))


def test_plan_rejects_ols_when_n_too_small():
    with pytest.raises(ValueError):
        _tiny_plan(combos=(Combo("ols", "ols"),), n_values=(100,))


def test_plan_needs_combos_and_sizes():
    with pytest.raises(ValueError):
        _tiny_plan(combos=())
    with pytest.raises(ValueError):
        _tiny_plan(n_values=())
    with pytest.raises(ValueError):
        _tiny_plan(repetitions=0)


def test_benchmark_plan_shape():
    plan = benchmark_plan(repetitions=3)
    assert plan.p == 200
    assert plan.n_values == (100,)
    assert plan.repetitions == 3
    names = [c.name for c in plan.combos]
    assert names[0] == "ridge_i"
    assert "slasso_amnr" in names and "enet_l_amnr" in names
    assert "nn_slasso_amnr" in names and "snng_fnlasso" in names
    snng = next(c for c in plan.combos if c.name == "snng_fnlasso")
    assert snng.reference == "fnlasso_mnr"
    assert names.index("fnlasso_mnr") < names.index("snng_fnlasso")


# --- running ---


def test_row_contract_single_combo():
    rows = run_experiment(_tiny_plan(repetitions=1))
    assert len(rows) == 1
    row = rows[0]
    assert row.model == "lasso_amnr"
    assert row.algorithm == "amnr"
    assert row.repetition == 0
    assert row.n == 40
    assert row.error is None
    assert 0.0 <= row.auc <= 1.0
    assert row.re >= 0.0
    assert row.time > 0.0
    assert row.lambda_selected > 0.0


def test_row_count_is_reps_times_sizes_times_combos():
    plan = _tiny_plan(
        repetitions=2,
        n_values=(30, 40),
        combos=(Combo("lasso_amnr", "lasso"), Combo("ridge_i", "ridge_i")),
    )
    rows = run_experiment(plan)
    assert len(rows) == 2 * 2 * 2
    # rows arrive in (repetition, n, combo) order
    key = [(r.repetition, r.n, r.model) for r in rows]
    assert key == sorted(key, key=lambda t: (t[0], t[1] != 30, t[2] != "lasso_amnr"))


def test_rerun_is_deterministic_except_time():
    plan = _tiny_plan()
    a = run_experiment(plan)
    b = run_experiment(plan)
    for ra, rb in zip(a, b):
        assert ra.auc == rb.auc
        assert ra.re == rb.re
        assert ra.lambda_selected == rb.lambda_selected


def test_seed_base_changes_draws():
    a = run_experiment(_tiny_plan(repetitions=1, seed_base=0))
    b = run_experiment(_tiny_plan(repetitions=1, seed_base=77))
    assert a[0].auc != b[0].auc


def test_worker_count_does_not_change_results():
    plan = _tiny_plan()
    serial = run_experiment(plan, workers=1)
    parallel = run_experiment(plan, workers=2)
    assert len(serial) == len(parallel)
    for ra, rb in zip(serial, parallel):
        assert (ra.repetition, ra.n, ra.model) == (rb.repetition, rb.n, rb.model)
        assert ra.auc == rb.auc
        assert ra.re == rb.re
        assert ra.lambda_selected == rb.lambda_selected


def test_combo_failure_becomes_error_row(monkeypatch):
    original = bench._run_combo

    def exploding(problem, combo, plan, context):
        if combo.name == "boom":
            raise RuntimeError("synthetic failure")
        return original(problem, combo, plan, context)

    monkeypatch.setattr(bench, "_run_combo", exploding)
    plan = _tiny_plan(
        repetitions=1,
        combos=(Combo("lasso_amnr", "lasso"), Combo("boom", "ridge_i")),
    )
    rows = run_experiment(plan)
    assert len(rows) == 2
    good = next(r for r in rows if r.model == "lasso_amnr")
    bad = next(r for r in rows if r.model == "boom")
    assert good.error is None
    assert bad.error is not None and "synthetic failure" in bad.error
    assert np.isnan(bad.auc)


def test_garrote_support_within_reference_support():
    plan = _tiny_plan(
        repetitions=1,
        combos=(
            Combo("fnlasso_mnr", "fnlasso"),
            Combo("snng_fnlasso", "snng", reference="fnlasso_mnr", lambda_sm=(2.0,)),
        ),
    )
    rows, solutions = run_experiment(plan, keep_solutions=True)
    assert all(r.error is None for r in rows)
    ref = solutions[(0, 40, "fnlasso_mnr")].beta_sparse
    garrote = solutions[(0, 40, "snng_fnlasso")].beta
    assert np.all(garrote[ref == 0.0] == 0.0)
    assert np.count_nonzero(garrote) >= 1


def test_keep_solutions_returns_pairs():
    plan = _tiny_plan(repetitions=1)
    rows, solutions = run_experiment(plan, keep_solutions=True)
    assert set(solutions) == {(0, 40, "lasso_amnr")}
    sol = solutions[(0, 40, "lasso_amnr")]
    assert sol.beta.shape == (151,)
    assert rows[0].lambda_selected == sol.lam


# --- table summaries ---


def _row(model, rep, n, auc_v, re_v, time_v=1.0, error=None):
    return MetricRow(
        model, "amnr", rep,
        auc=auc_v, re=re_v, time=time_v, lambda_selected=0.1, n=n, error=error,
    )


def test_pooled_summary_means():
    rows = [
        _row("a", 0, 50, 0.8, 0.4, 1.0),
        _row("a", 1, 50, 0.9, 0.2, 3.0),
        _row("a", 0, 100, 1.0, 0.3, 2.0),
    ]
    (s,) = pooled_summary(rows)
    assert s["model"] == "a"
    assert s["auc"] == pytest.approx(0.9)
    assert s["re"] == pytest.approx(0.3)
    assert s["time"] == pytest.approx(2.0)
    assert s["rows"] == 3
    assert set(s) == {"model", "algorithm", "re", "auc", "time", "rows"}


def test_pooled_summary_coverage_error():
    rows = [
        _row("a", 0, 50, 0.8, 0.4),
        _row("a", 0, 100, 0.9, 0.2),
        _row("b", 0, 50, 0.7, 0.5),
        _row("b", 0, 100, np.nan, np.nan, error="exploded"),
    ]
    with pytest.raises(ValueError, match="coverage"):
        pooled_summary(rows)


def test_pooled_summary_empty_raises():
    with pytest.raises(ValueError):
        pooled_summary([])


def test_median_auc_exemplar_odd_group():
    rows = [
        _row("a", 0, 50, 0.7, 0.1),
        _row("a", 1, 50, 0.8, 0.1),
        _row("a", 2, 50, 0.9, 0.1),
    ]
    solutions = {(rep, 50, "a"): f"sol{rep}" for rep in range(3)}
    out = median_auc_exemplar(rows, solutions)
    assert out[("a", "amnr", 50)] == (1, "sol1")


def test_median_auc_exemplar_tie_takes_lower_repetition():
    # 0.75 and 1.0 are binary-exact, so both sit exactly 0.125 from the median
    rows = [_row("a", 0, 50, 0.75, 0.1), _row("a", 1, 50, 1.0, 0.1)]
    solutions = {(0, 50, "a"): "low", (1, 50, "a"): "high"}
    out = median_auc_exemplar(rows, solutions)
    assert out[("a", "amnr", 50)] == (0, "low")


def test_median_auc_exemplar_skips_groups_without_solutions():
    rows = [_row("a", 0, 50, 0.7, 0.1)]
    assert median_auc_exemplar(rows, {}) == {}
