import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qgcn_ris.harness import (ABLATIONS, ExperimentSpec, ResultRow, ablation_table, export,
                              mean_ci, overhead_report, paired_digests_match, records_to_text,
                              rows_from_csv, rows_to_csv, rows_to_json, run_ablation,
                              run_experiment, run_single, run_sweep, summarize)
from qgcn_ris.config import SystemConfig, TimingConfig, TrainConfig

FAST = ExperimentSpec(n_runs=2, shots=None, noise=False, train={"epochs": 2, "n_layers": 1},
                      baseline_epochs=3)


def row(**kw):
    base = dict(config="full", method="qgcn", n_elements=4, seed=0, min_rate=0.1, sum_rate=0.5,
                rates="0.1;0.2;0.2", feasible=True, n_active=4, convergence_epoch=3,
                circuit_evals=69, scenario="abc", wall_time=0.0)
    base.update(kw)
    return ResultRow(**base)


class TestExport:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 10, allow_nan=False), st.integers(0, 99),
                              st.booleans(), st.text("ab,\"\n", max_size=5)), max_size=6))
    def test_csv_round_trip(self, items):
        rows = [row(min_rate=m, seed=s, feasible=f, scenario=t) for m, s, f, t in items]
        back = rows_from_csv(rows_to_csv(rows, include_timing=True))
        assert back == rows

    def test_header_only(self):
        text = rows_to_csv([])
        assert text.count("\r\n") == 1
        assert "wall_time" not in text and text.startswith("config,method")
        assert json.loads(rows_to_json([])) == []

    def test_timing_column_optional(self):
        assert "wall_time" in rows_to_csv([row()], include_timing=True)
        assert "wall_time" not in json.loads(rows_to_json([row()]))[0]

    def test_json_values(self):
        d = json.loads(rows_to_json([row(min_rate=0.25)]))[0]
        assert d["min_rate"] == 0.25 and d["feasible"] is True

    def test_float_repr_exact(self):
        x = 0.1 + 0.2
        assert rows_from_csv(rows_to_csv([row(min_rate=x)]))[0].min_rate == x

    def test_bad_format_and_path(self, tmp_path):
        with pytest.raises(ValueError):
            export([row()], tmp_path / "x", "xml")
        with pytest.raises(OSError, match="cannot write"):
            export([row()], tmp_path / "missing" / "x.csv")

    def test_records_none_is_empty_cell(self):
        assert records_to_text([{"a": None, "b": 1.5}]) == "a,b\r\n,1.5\r\n"


class TestSummary:
    def test_mean_ci_against_scipy(self):
        x = [0.1, 0.3, 0.2, 0.5]
        m, sd, half = mean_ci(x)
        lo, hi = stats.t.interval(0.95, len(x) - 1, loc=np.mean(x), scale=stats.sem(x))
        assert m == pytest.approx(np.mean(x))
        assert half == pytest.approx((hi - lo) / 2)
        assert mean_ci([2.0]) == (2.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            mean_ci([])

    def test_summarize_groups(self):
        rows = [row(seed=s, min_rate=r) for s, r in enumerate([0.1, 0.3])]
        rows += [row(method="gd", seed=0, min_rate=0.2, feasible=False)]
        s = summarize(rows)
        assert [(x["method"], x["runs"]) for x in s] == [("qgcn", 2), ("gd", 1)]
        assert s[0]["mean_min_rate"] == pytest.approx(0.2)
        assert s[1]["feasible_fraction"] == 0.0

    def test_ablation_table_relative(self):
        rows = [row(config=c, min_rate=v)
                for c, v in zip(ABLATIONS, [0.2, 0.15, 0.1])]
        t = ablation_table(rows)
        assert [x["change_vs_full"] for x in t] == pytest.approx([0.0, -0.25, -0.5])
        assert t[1]["published"] == -0.251
        zero = ablation_table([row(config=c, min_rate=0.0) for c in ABLATIONS])
        assert zero[1]["change_vs_full"] is None
        with pytest.raises(ValueError):
            ablation_table([row(config="no_double_sided")])

    def test_paired_digest_check(self):
        assert paired_digests_match([row(config="full"), row(config="no_double_sided")])
        assert not paired_digests_match([row(), row(config="no_double_sided", scenario="x")])


class TestRunners:
    def test_row_counts_and_determinism(self):
        spec = replace(FAST, methods=("qgcn", "random", "fixed", "gd"))
        a = run_experiment(spec)
        b = run_experiment(spec)
        assert len(a) == 2 * 4
        assert rows_to_csv(a) == rows_to_csv(b)
        qg = [r for r in a if r.method == "qgcn"]
        assert all(r.circuit_evals == 2 * (1 + 2 * 17) for r in qg)

    def test_oracle_dominates_projected_methods(self):
        spec = replace(FAST, methods=("random", "continuous", "discrete", "oracle"),
                       system={"n_ues": 2, "n_min": 2})
        rows = run_experiment(spec)
        for seed in (0, 1):
            best = next(r.min_rate for r in rows if r.seed == seed and r.method == "oracle")
            for r in rows:
                if r.seed == seed and r.feasible:
                    assert r.min_rate <= best + 1e-9

    def test_ablation_paired(self):
        rows = run_ablation(replace(FAST, n_runs=2))
        assert len(rows) == 3 * 2 and paired_digests_match(rows)
        ds = [r for r in rows if r.config == "no_double_sided"]
        nv = [r for r in rows if r.config == "no_virtual_spacing"]
        assert all(r.n_active == 4 for r in nv)
        assert all(r.n_active <= 4 for r in ds)

    def test_sweep_rows(self):
        rows = run_sweep(replace(FAST, n_runs=1, methods=("fixed",)), [2, 3])
        assert [r.n_elements for r in rows] == [2, 3]
        with pytest.raises(ValueError):
            run_sweep(FAST, [])

    def test_workers_match_serial(self):
        spec = replace(FAST, methods=("random", "fixed"), n_runs=2)
        assert rows_to_csv(run_experiment(spec)) == rows_to_csv(
            run_experiment(replace(spec, workers=2)))

    @pytest.mark.parametrize("bad", [
        dict(methods=("nope",)), dict(methods=()), dict(n_runs=0), dict(shots=0),
        dict(ablation_mode="half"), dict(ablation_mode="no_double_sided", methods=("gd",)),
        dict(methods=("oracle",), system={"n_elements": 9}),
        dict(train={"block_cap": 14}, system={"n_elements": 14}),
    ])
    def test_contract_violations(self, bad):
        with pytest.raises(ValueError):
            run_experiment(replace(FAST, **bad))

    def test_single_row_fields(self):
        r = run_single(FAST, "fixed", 3)
        assert r.n_active == 4 and r.feasible and r.circuit_evals == 0
        rates = [float(x) for x in r.rates.split(";")]
        assert r.min_rate == min(rates) and r.sum_rate == pytest.approx(sum(rates))


class TestOverhead:
    def test_counts(self):
        rep = overhead_report(SystemConfig.build(n_elements=4), TrainConfig(epochs=50))
        (blk,) = rep["blocks"]
        assert blk["qubits"] == 8 and blk["params"] == 34
        assert blk["circuit_evals_per_epoch"] == 69
        assert rep["circuit_evals_total"] == 69 * 50
        assert rep["shots_total"] == 69 * 50 * 2048
        assert rep["coherence_feasible"] is False

    def test_exact_mode_and_blocks(self):
        rep = overhead_report(SystemConfig.build(n_elements=8),
                              TrainConfig(shots=None, block_cap=4), TimingConfig(opt_time=0.0))
        assert len(rep["blocks"]) == 2 and rep["shots_total"] is None
        assert rep["coherence_feasible"] is True
