"""Config parsing, CSV output, experiment runners, and the CLI surface."""

import filecmp
import math
import os

import numpy as np
import pytest

from uemb.expcli.config import (
    ConfigError,
    emit_csv,
    make_config,
    parse_config,
    parse_map,
)
from uemb.expcli.main import main
from uemb.expcli.runners import (
    DatasetError,
    run_bounds_sweep,
    run_design_sim,
    run_map_eval,
    run_quantization_sim,
    run_retrieval,
    run_universal_scatter,
)


class TestConfigParsing:
    def test_round_trip_values(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(
            "# experiment\n"
            "kind = design_sim\n"
            "M = 2000\n"
            "sigma_list = 0.5,0.75,1.0\n"
            "seed = 7\n"
        )
        cfg = parse_config(p)
        assert cfg["M"] == 2000
        assert cfg["sigma_list"] == [0.5, 0.75, 1.0]
        assert cfg.seed == 7
        assert cfg["pairs"] == 500  # default

    def test_unknown_key_names_line(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("kind = design_sim\nsigm = 1\n")
        with pytest.raises(ConfigError, match=r":2:.*sigm"):
            parse_config(p)

    def test_duplicate_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("kind = design_sim\nM = 10\nM = 20\n")
        with pytest.raises(ConfigError, match=r":3:.*duplicate"):
            parse_config(p)

    def test_missing_kind(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("M = 10\n")
        with pytest.raises(ConfigError, match="kind"):
            parse_config(p)

    def test_bad_value_type(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("kind = design_sim\nM = abc\n")
        with pytest.raises(ConfigError, match=":2:"):
            parse_config(p)

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="delta_list"):
            make_config("retrieval", rate_list=[64])

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("kind = design_sim\njust a line\n")
        with pytest.raises(ConfigError, match=":2:"):
            parse_config(p)


class TestMapSelectors:
    @pytest.mark.parametrize(
        "sel",
        [
            "square",
            "sawtooth",
            "multibit:B=3",
            "mixture:1:0.5,10:0.25",
            "quantized:mixture:1:0.5,10:0.25:B=4",
            "quantized:sawtooth:B=2",
        ],
    )
    def test_selector_round_trip(self, sel):
        m = parse_map(sel)
        m2 = parse_map(m.name)
        ts = np.linspace(0, 1, 257, endpoint=False)
        np.testing.assert_array_equal(m(ts), m2(ts))

    def test_bad_selectors(self):
        for sel in ("triangle", "multibit:4", "mixture:1", "quantized:square"):
            with pytest.raises(ConfigError):
                parse_map(sel)


class TestEmitCsv:
    def test_deterministic_formatting(self, tmp_path):
        p = tmp_path / "t.csv"
        emit_csv(p, ["a", "b"], [(1, 0.1), (2, 1.0 / 3.0)])
        text = p.read_text()
        assert text == "a,b\n1,0.1\n2,0.3333333333333333\n"

    def test_quoting(self, tmp_path):
        p = tmp_path / "t.csv"
        emit_csv(p, ["x"], [("needs,quote",)])
        assert p.read_text() == 'x\n"needs,quote"\n'


def tiny_design_cfg(**kw):
    return make_config(
        "design_sim", N=48, M=256, pairs=60, sigma_list=[0.3], seed=11, **kw
    )


class TestRunners:
    def test_design_sim(self, tmp_path):
        res = run_design_sim(tiny_design_cfg(), tmp_path)
        scatter = (tmp_path / "design_scatter_sigma=0.3.csv").read_text().splitlines()
        assert scatter[0] == "d_true,emb_sq_l2_mean,g_theory"
        assert len(scatter) == 61
        # d = 0 pair embeds to distance exactly 0
        first = scatter[1].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == 0.0
        assert res["summary"][0][2] >= 0.9  # strong concentration already

    def test_design_sim_rerun_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        run_design_sim(tiny_design_cfg(), a)
        run_design_sim(tiny_design_cfg(), b)
        name = "design_scatter_sigma=0.3.csv"
        assert filecmp.cmp(a / name, b / name, shallow=False)

    def test_quantization_sim_within_inflation(self, tmp_path):
        cfg = make_config(
            "quantization_sim", N=48, M=256, pairs=40, b_list=[1, 2],
            sigma=0.25, seed=3,
        )
        res = run_quantization_sim(cfg, tmp_path)
        for row in res["summary"]:
            assert row[-1]  # within eps + 2 E_Q always (triangle inequality)

    def test_quantization_sim_universal_variant(self, tmp_path):
        cfg = make_config(
            "quantization_sim", N=48, M=512, pairs=40, b_list=[4],
            variant="universal", sigma=1.0, delta=1.0, d_max=3.0, seed=5,
        )
        res = run_quantization_sim(cfg, tmp_path)
        assert res["summary"][0][1] < 0.05  # B=4 hugs the sawtooth curve

    def test_universal_scatter(self, tmp_path):
        cfg = make_config(
            "universal_scatter", N=48, pairs=80, delta_list=[0.5, 1.5],
            m_list=[128, 1024], sigma=1.0, seed=9,
        )
        res = run_universal_scatter(cfg, tmp_path)
        rows = res["summary"]
        # all hamming values in [0, 1]
        for f in res["files"]:
            if "scatter_delta" in os.path.basename(f):
                data = np.genfromtxt(f, delimiter=",", names=True)
                assert np.all(data["hamming_mean"] >= 0)
                assert np.all(data["hamming_mean"] <= 1)
        # spread shrinks as M grows at fixed Delta
        by_cell = {(r[0], r[1]): r[2] for r in rows}
        assert by_cell[(0.5, 1024)] < by_cell[(0.5, 128)]
        assert by_cell[(1.5, 1024)] < by_cell[(1.5, 128)]
        # upward-slope endpoint (D0) scales linearly with Delta
        d0 = {(r[0], r[1]): r[3] for r in rows}
        assert d0[(1.5, 128)] / d0[(0.5, 128)] == pytest.approx(3.0, rel=1e-9)

    def test_retrieval_baseline_and_chance(self, tmp_path):
        cfg = make_config(
            "retrieval", N=32, clusters=10, points_per_cluster=4,
            cluster_radius=0.05, delta_list=[1.0, 400.0], rate_list=[256],
            candidates=3, seed=2,
        )
        res = run_retrieval(cfg, tmp_path)
        assert res["baseline_l2_accuracy"] == 1.0
        accs = {r[0]: r[2] for r in res["summary"]}
        assert accs[1.0] > 0.8
        assert accs[400.0] <= 3 * res["chance"] + 1e-9

    def test_retrieval_refuses_overlapping_clusters(self, tmp_path):
        cfg = make_config(
            "retrieval", N=16, clusters=8, points_per_cluster=3,
            cluster_radius=5.0, delta_list=[1.0], rate_list=[64], seed=2,
        )
        with pytest.raises(DatasetError, match="overlap"):
            run_retrieval(cfg, tmp_path)

    def test_bounds_sweep_pointcloud(self, tmp_path):
        cfg = make_config(
            "bounds_sweep", calculator="pointcloud", q=2, m_list=[1000],
            eps_list=[0.1], hbar=1.0, flavor="sq_l2",
        )
        res = run_bounds_sweep(cfg, tmp_path)
        assert res["rows"][0][5] == pytest.approx(math.exp(2 * math.log(2) - 20))

    def test_bounds_sweep_binary_threshold(self, tmp_path):
        cfg = make_config(
            "bounds_sweep", calculator="binary_infinite",
            eps_list=[0.588, 0.589], m_list=[1000],
        )
        res = run_bounds_sweep(cfg, tmp_path)
        decay_flags = {r[0]: r[4] for r in res["rows"]}
        assert decay_flags[0.588] and not decay_flags[0.589]
        assert res["threshold"] == pytest.approx(math.sqrt(0.5 * math.log(2)))

    def test_bounds_sweep_ball_crossing(self, tmp_path):
        cfg = make_config(
            "bounds_sweep", calculator="ball_crossing", n_list=[100],
            r_list=[0.05, 2.0], sigma=1.0, delta=10.0,
        )
        res = run_bounds_sweep(cfg, tmp_path)
        rows = {r[1]: r for r in res["rows"]}
        assert rows[0.05][3] and not rows[2.0][3]

    def test_map_eval_binary_bounds_columns(self, tmp_path):
        cfg = make_config("map_eval", map="square", sigma=1.0, delta=1.0, d_count=10)
        run_map_eval(cfg, tmp_path)
        header = (tmp_path / "map_curve.csv").read_text().splitlines()[0]
        assert header == "d,g,g_sqrt,K,lower5,upper6,upper7"

    def test_map_eval_plain_map(self, tmp_path):
        cfg = make_config("map_eval", map="sawtooth", scale=0.5, d_count=8)
        run_map_eval(cfg, tmp_path)
        header = (tmp_path / "map_curve.csv").read_text().splitlines()[0]
        assert header == "d,g,g_sqrt,K"

    def test_thread_count_cannot_change_output(self, tmp_path, monkeypatch):
        cfg = make_config(
            "universal_scatter", N=32, pairs=30, delta_list=[0.5, 1.5],
            m_list=[64, 128], sigma=1.0, seed=4,
        )
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        run_universal_scatter(cfg, a)
        monkeypatch.setenv("UEMB_THREADS", "3")
        run_universal_scatter(cfg, b)
        for f in sorted(os.listdir(a)):
            assert filecmp.cmp(a / f, b / f, shallow=False), f


class TestCli:
    def _write(self, tmp_path, text):
        p = tmp_path / "cfg.cfg"
        p.write_text(text)
        return str(p)

    def test_success_exit_zero(self, tmp_path, capsys):
        cfg = self._write(
            tmp_path,
            "kind = map_eval\nmap = square\nd_count = 5\n",
        )
        rc = main(["map-eval", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 0
        assert "map_curve.csv" in capsys.readouterr().out

    def test_config_error_exit_two(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "kind = map_eval\nbogus = 1\n")
        rc = main(["map-eval", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_kind_mismatch_exit_two(self, tmp_path):
        cfg = self._write(tmp_path, "kind = design_sim\n")
        assert main(["map-eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_file_exit_two(self, tmp_path):
        missing = str(tmp_path / "nope.cfg")
        assert main(["map-eval", "--config", missing, "--out", str(tmp_path / "o")]) == 2

    def test_runtime_error_exit_three(self, tmp_path, capsys):
        cfg = self._write(
            tmp_path,
            "kind = retrieval\nN = 16\nclusters = 8\npoints_per_cluster = 3\n"
            "cluster_radius = 5.0\ndelta_list = 1.0\nrate_list = 64\n",
        )
        rc = main(["retrieve", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "overlap" in capsys.readouterr().err

    def test_seed_override_changes_output(self, tmp_path):
        cfg = self._write(
            tmp_path,
            "kind = design_sim\nN = 32\nM = 64\npairs = 10\nsigma_list = 0.3\n",
        )
        out1, out2, out3 = (str(tmp_path / d) for d in ("o1", "o2", "o3"))
        assert main(["design-sim", "--config", cfg, "--out", out1, "--seed", "1"]) == 0
        assert main(["design-sim", "--config", cfg, "--out", out2, "--seed", "2"]) == 0
        assert main(["design-sim", "--config", cfg, "--out", out3, "--seed", "1"]) == 0
        name = "design_scatter_sigma=0.3.csv"
        a = (tmp_path / "o1" / name).read_bytes()
        b = (tmp_path / "o2" / name).read_bytes()
        c = (tmp_path / "o3" / name).read_bytes()
        assert a != b and a == c
