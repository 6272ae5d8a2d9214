import csv
import json
import math
import re

import numpy as np
import pytest

from onebit.bench import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    PlotSpec,
    TrialRecord,
    ber,
    config_from_mapping,
    default_plot_spec,
    emit_svg_plot,
    load_config,
    parse_config_text,
    read_records,
    run_experiment,
    run_trial,
    signflip_ratio,
    summarize,
)
from onebit.model import generate_instance

from conftest import noiseless_instance


def csv_without_times(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    k = rows[0].index("wall_time_us")
    return [r[:k] + r[k + 1:] for r in rows]


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.row())


def record(method, snr, errors, bits=8, trial=0, **extra):
    return TrialRecord(trial, method, snr, 4, 4, errors, bits, 100, 1.0, "ok", extra)


class TestMetrics:
    def test_ber_examples(self):
        x = np.ones(8)
        assert ber(x, x) == (0, 8)
        assert ber(-x, x) == (8, 8)
        y = x.copy()
        y[[1, 4]] = -1
        assert ber(y, x) == (2, 8)

    def test_ber_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            ber(np.ones(3), np.ones(4))

    def test_signflip_noiseless(self):
        inst = noiseless_instance(8, 3, seed=1)
        assert signflip_ratio(inst, inst.x_true) == 0.0
        assert signflip_ratio(inst, -inst.x_true) == 1.0

    def test_signflip_is_row_fraction(self):
        inst = generate_instance(6, 2, 0.0, seed=2)
        x = np.array([1.0, -1.0, 1.0, 1.0])
        assert signflip_ratio(inst, x) == np.count_nonzero(inst.b @ x < 0) / inst.m


class TestConfig:
    def test_defaults_validate(self):
        cfg = ExperimentConfig().validate()
        assert cfg.trials == 500 and cfg.sizes() == [(18, 4)]

    def test_size_broadcast(self):
        cfg = ExperimentConfig(m_tilde=[64], n_tilde=[4, 6, 8])
        assert cfg.sizes() == [(64, 4), (64, 6), (64, 8)]
        with pytest.raises(ConfigError):
            ExperimentConfig(m_tilde=[8, 16], n_tilde=[2, 3, 4]).validate()

    @pytest.mark.parametrize("bad", [dict(trials=0), dict(methods=["MMSE"]), dict(experiment="fig9"),
                                     dict(methods=["exhaustive"], n_tilde=[13]), dict(mode="alg3"),
                                     dict(snr_db_list=[]), dict(abb_tau=1.5), dict(workers=0),
                                     dict(methods=["gML"], n_tilde=[40])])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad).validate()

    def test_text_format(self):
        text = """
        # BER sweep
        experiment = ber
        m_tilde = 18
        n_tilde = 4
        snr_db_list = 0, 5, 10   # dB
        methods = gML, quantZF
        incumbent-shortcut = off
        abb_rho = none
        """
        cfg = config_from_mapping(parse_config_text(text))
        assert cfg.snr_db_list == [0.0, 5.0, 10.0]
        assert cfg.methods == ["gML", "quantZF"]
        assert cfg.incumbent_shortcut is False
        assert cfg.abb_rho is None

    def test_text_errors(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("trials = 3\nbogus line\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            config_from_mapping({"trails": "3"})
        with pytest.raises(ConfigError, match="trials"):
            config_from_mapping({"trials": "three"})
        with pytest.raises(ConfigError, match="boolean"):
            config_from_mapping({"incumbent_shortcut": "maybe"})

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("trials = 7\nmethods = quantZF\n")
        assert load_config(path).trials == 7
        assert load_config(path, {"trials": "2"}).trials == 2
        assert load_config(None, {"trials": "3"}).trials == 3

    def test_solver_and_abb_passthrough(self):
        cfg = ExperimentConfig(node_limit=5, mode="alg1", abb_kappa=2, abb_rho=0.7)
        opts = cfg.solver_options()
        assert (opts.node_limit, opts.mode) == (5, "alg1")
        assert cfg.abb_overrides() == {"gll_memory_kappa": 2, "rho": 0.7}


class TestRunExperiment:
    def test_one_record_per_cell(self):
        cfg = ExperimentConfig(methods=["quantZF"], trials=1, m_tilde=[8], n_tilde=[2, 3], snr_db_list=[0, 10])
        recs = run_experiment(cfg)
        assert len(recs) == 4
        assert {(r.n_tilde, r.snr_db) for r in recs} == {(2, 0.0), (2, 10.0), (3, 0.0), (3, 10.0)}
        assert all(0 <= r.bit_errors <= r.bits == 2 * r.n_tilde for r in recs)

    def test_methods_share_the_instance(self):
        cfg = ExperimentConfig(methods=["gML", "AR-L1", "quantZF"], m_tilde=[8], n_tilde=[2])
        recs = run_trial(cfg, 8, 2, 10.0, 3)
        assert [r.method for r in recs] == ["gML", "AR-L1", "quantZF"]
        assert len({r.extra["signflip_true"] for r in recs}) == 1
        inst = generate_instance(8, 2, 10.0, cfg.base_seed + 3)
        assert recs[0].extra["signflip_true"] == signflip_ratio(inst, inst.x_true)

    def test_rerun_is_identical_apart_from_times(self, tmp_path):
        kw = dict(methods=["gML", "AR-L1-ABB", "quantZF"], trials=4, m_tilde=[8], n_tilde=[3],
                  snr_db_list=[0, 10])
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        run_experiment(ExperimentConfig(output_path=str(a), **kw))
        run_experiment(ExperimentConfig(output_path=str(b), **kw))
        run_experiment(ExperimentConfig(output_path=str(c), workers=2, **kw))
        assert csv_without_times(a) == csv_without_times(b) == csv_without_times(c)
        assert tuple(csv_without_times(a)[0]) == tuple(h for h in CSV_HEADER if h != "wall_time_us")

    def test_header_is_exact(self, tmp_path):
        out = tmp_path / "x.csv"
        run_experiment(ExperimentConfig(methods=["quantZF"], trials=1, output_path=str(out)))
        assert out.read_text().splitlines()[0] == \
            "trial,method,snr_db,m_tilde,n_tilde,bit_errors,bits,wall_time_us,objective,status,extra_json"

    def test_global_solver_matches_exhaustive(self):
        cfg = ExperimentConfig(methods=["gML", "exhaustive"], trials=100, m_tilde=[8], n_tilde=[3],
                               snr_db_list=[5.0])
        recs = run_experiment(cfg)
        by = {}
        for r in recs:
            by.setdefault(r.trial, {})[r.method] = r
        for pair in by.values():
            assert pair["gML"].objective == pytest.approx(pair["exhaustive"].objective, abs=1e-8)
        s = {r.method: r for r in summarize(recs)}
        assert s["gML"].extra["ber"] == s["exhaustive"].extra["ber"]

    def test_summary_matches_raw(self, tmp_path):
        out = tmp_path / "s.csv"
        cfg = ExperimentConfig(methods=["quantZF", "AR-L1-ABB"], trials=6, m_tilde=[8], n_tilde=[3],
                               snr_db_list=[0, 5], output_path=str(out))
        run_experiment(cfg)
        rows = read_records(out)
        raw = [r for r in rows if r.trial != "summary"]
        summ = [r for r in rows if r.trial == "summary"]
        assert len(summ) == 4
        for s in summ:
            cell = [r for r in raw if (r.method, r.snr_db) == (s.method, s.snr_db)]
            want = np.mean([r.bit_errors / r.bits for r in cell])
            assert abs(s.extra["ber"] - want) <= 1e-12
            assert s.extra["trials"] == 6
            assert s.bit_errors == sum(r.bit_errors for r in cell)
            assert s.extra["mean_signflip_ratio"] == pytest.approx(
                np.mean([r.extra["signflip_ratio"] for r in cell]), abs=1e-12)

    def test_failures_are_recorded(self, monkeypatch):
        import onebit.bench as bench

        def boom(method, inst, **kw):
            raise RuntimeError("solver exploded")

        monkeypatch.setattr(bench, "detect", boom)
        recs = run_experiment(ExperimentConfig(methods=["gML"], trials=2, snr_db_list=[0]))
        assert len(recs) == 2
        assert all(r.status.startswith("error: RuntimeError") for r in recs)
        assert all(math.isnan(r.objective) for r in recs)
        assert summarize(recs) == []

    def test_unproven_status(self):
        cfg = ExperimentConfig(methods=["gML"], trials=1, m_tilde=[16], n_tilde=[6], snr_db_list=[0],
                               node_limit=1, base_seed=1)
        (rec,) = run_experiment(cfg)
        assert rec.status == "not_proven"
        assert rec.extra["proven_optimal"] is False

    def test_progress_callback(self):
        seen = []
        run_experiment(ExperimentConfig(methods=["quantZF"], trials=3, snr_db_list=[0]), progress=seen.append)
        assert len(seen) == 3

    def test_read_rejects_missing_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("trial,method\n0,gML\n")
        with pytest.raises(ValueError, match="snr_db"):
            read_records(p)


class TestSvg:
    def test_empty_data_gives_axes_only(self, tmp_path):
        p = tmp_path / "e.csv"
        write_csv(p, [])
        svg = emit_svg_plot(p)
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert 'class="axes"' in svg and "polyline" not in svg

    def test_two_points_one_polyline(self, tmp_path):
        p = tmp_path / "two.csv"
        write_csv(p, [record("gML", 0.0, 2), record("gML", 10.0, 1)])
        svg = emit_svg_plot(p, PlotSpec(log_y=False))
        lines = re.findall(r'<polyline[^>]*points="([^"]*)"', svg)
        assert len(lines) == 1 and len(lines[0].split()) == 2

    def test_zero_ber_sits_on_floor(self, tmp_path):
        p = tmp_path / "z.csv"
        write_csv(p, [record("AR-L1", 0.0, 3), record("AR-L1", 20.0, 0)])
        svg = emit_svg_plot(p, PlotSpec(y_floor=1e-6))
        assert svg.count('class="floor-marker"') == 1
        assert 'class="floor-note"' in svg
        # the floor decade is the lowest tick label
        assert ">1e-6<" in svg

    def test_series_per_method_and_extra_key(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, [record("gML", 0.0, 1, signflip_ratio=0.3), record("quantZF", 0.0, 4, signflip_ratio=0.2),
                      record("gML", 5.0, 0, signflip_ratio=0.1)])
        svg = emit_svg_plot(p, default_plot_spec("signflip"), tmp_path / "out.svg")
        assert set(re.findall(r'data-method="([^"]*)"', svg)) == {"gML", "quantZF"}
        assert (tmp_path / "out.svg").read_text() == svg

    def test_missing_column_is_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("trial,method,snr_db\n0,gML,0.0\n")
        with pytest.raises(ValueError, match="'bit_errors'"):
            emit_svg_plot(p)
        with pytest.raises(ValueError, match="'n_tilde'"):
            emit_svg_plot(p, PlotSpec(x="n_tilde"))

    def test_summary_rows_ignored(self, tmp_path):
        p = tmp_path / "s.csv"
        rows = [record("gML", 0.0, 2), TrialRecord("summary", "gML", 0.0, 4, 4, 99, 8, 1, 1.0, "summary", {})]
        write_csv(p, rows)
        svg = emit_svg_plot(p, PlotSpec(log_y=False))
        assert len(re.findall(r'<polyline[^>]*points="([^"]*)"', svg)[0].split()) == 1

    def test_records_round_trip(self, tmp_path):
        p = tmp_path / "r.csv"
        rec = record("gML", 7.5, 3, nodes=4, cut_pool_ratio=0.25)
        write_csv(p, [rec])
        (back,) = read_records(p)
        assert back == rec
        assert json.loads(rec.row()[-1]) == {"cut_pool_ratio": 0.25, "nodes": 4}
