import math
import os

import numpy as np
import pytest

import chemofv.experiments as xp
from chemofv.cli import main as cli_main
from chemofv.diagnostics import ObservableSeries
from chemofv.mesh import build_uniform_1d, mean_value


class TestConfig:
    def test_preset_lookup(self):
        cfg = xp.preset_config("testcase1")
        assert cfg.float("params", "epsilon") == 1e-3
        assert cfg.float("params", "delta") == 1e-3
        assert cfg.float("params", "beta") == 0.1
        assert cfg.ints("testcase1", "levels") == [50, 100, 200, 400]

    def test_unknown_preset(self):
        with pytest.raises(xp.ConfigError, match="unknown preset"):
            xp.preset_config("testcase9")

    def test_override_merge(self):
        cfg = xp.preset_config("testcase1", overrides={"params": {"beta": "0.2"}})
        assert cfg.float("params", "beta") == 0.2
        assert cfg.float("params", "epsilon") == 1e-3

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        with pytest.raises(xp.ConfigError, match="required"):
            xp.parse_config(path)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[params]\nepsilonn = 1\n")
        with pytest.raises(xp.ConfigError, match="unknown key"):
            xp.parse_config(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "dup.cfg"
        path.write_text("[params]\nepsilon = 1\nepsilon = 2\n")
        with pytest.raises(xp.ConfigError, match="malformed"):
            xp.parse_config(path)

    def test_preset_from_file(self, tmp_path):
        path = tmp_path / "tc.cfg"
        path.write_text("[run]\npreset = testcase1\n\n[params]\nbeta = 0.2\n")
        cfg = xp.parse_config(path)
        assert cfg.float("params", "beta") == 0.2
        assert cfg.str("run", "driver") == "testcase1"

    def test_type_errors(self, tmp_path):
        path = tmp_path / "typ.cfg"
        path.write_text("[run]\npreset = testcase1\n\n[params]\nbeta = fast\n")
        cfg = xp.parse_config(path)
        with pytest.raises(xp.ConfigError, match="not a number"):
            cfg.float("params", "beta")

    def test_missing_required(self):
        cfg = xp.RunConfig({"run": {"driver": "custom"}})
        with pytest.raises(xp.ConfigError, match="missing required"):
            cfg.raw("mesh", "kind")

    def test_paper_scale_overrides(self):
        cfg = xp.preset_config("testcase1", paper_scale=True)
        assert cfg.float("schedule", "dt") == 1e-4
        assert cfg.int("testcase1", "reference") == 3200

    def test_schedule_parsing(self):
        cfg = xp.RunConfig({"schedule": {"segments": "1e-8 x 100, 1e-2 x 50"}})
        assert xp.resolve_schedule(cfg) == ((1e-8, 100), (1e-2, 50))
        cfg2 = xp.RunConfig({"schedule": {"dt": "0.1", "t_final": "2"}})
        assert xp.resolve_schedule(cfg2) == ((0.1, 20),)
        cfg3 = xp.RunConfig({"schedule": {"dt": "0.3", "t_final": "1"}})
        with pytest.raises(xp.ConfigError, match="whole number"):
            xp.resolve_schedule(cfg3)


class TestBessel:
    def test_values_at_zero(self):
        assert xp.bessel_j(0, 0.0) == 1.0
        assert xp.bessel_j(1, 0.0) == 0.0

    def test_first_root_of_j1_derivative(self):
        # central difference of J1 vanishes at the tabulated root
        root = xp.first_bessel_derivative_root(1)
        assert root == pytest.approx(1.8412, abs=2e-4)
        h = 1e-6
        deriv = (xp.bessel_j(1, root + h) - xp.bessel_j(1, root - h)) / (2 * h)
        assert abs(deriv) <= 1e-3

    def test_j0_first_zero(self):
        assert abs(xp.bessel_j(0, 2.404826)) <= 1e-6

    def test_series_oracle_on_interval(self):
        # high-precision power-series oracle via mpmath
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 40
        xs = np.linspace(0.0, 12.0, 121)
        for x in xs:
            assert abs(xp.bessel_j(0, x) - float(mpmath.besselj(0, x))) <= 1e-10
            assert abs(xp.bessel_j(1, x) - float(mpmath.besselj(1, x))) <= 1e-10

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            xp.bessel_j(2, 1.0)


class TestInitialData:
    def test_expression_1d(self):
        mesh = build_uniform_1d(0, 1, 16)
        params = xp.resolve_params(
            xp.RunConfig({"params": {"epsilon": "1e-3", "delta": "1e-3", "beta": "0.1"}}),
            (),
        )
        u = xp.initial_field("expr: 2 + sin(pi*x)", mesh, params)
        assert mean_value(u) == pytest.approx(2 + 2 / math.pi, rel=1e-10)

    def test_expression_rejects_unknown_names(self):
        mesh = build_uniform_1d(0, 1, 8)
        params = xp.resolve_params(
            xp.RunConfig({"params": {"epsilon": "1e-3", "delta": "1e-3", "beta": "0.1"}}),
            (),
        )
        with pytest.raises(xp.ConfigError, match="unknown name"):
            xp.initial_field("expr: __import__('os')", mesh, params)
        with pytest.raises(xp.ConfigError, match="unknown name"):
            xp.initial_field("expr: y", mesh, params)

    def test_random_uniform_seeded(self):
        mesh = build_uniform_1d(0, 1, 32)
        params = xp.resolve_params(
            xp.RunConfig({"params": {"epsilon": "1", "delta": "1", "beta": "1"}}), ()
        )
        rng1 = np.random.Generator(np.random.PCG64(5))
        rng2 = np.random.Generator(np.random.PCG64(5))
        a = xp.initial_field("random_uniform: 2, 6", mesh, params, rng=rng1)
        b = xp.initial_field("random_uniform: 2, 6", mesh, params, rng=rng2)
        assert np.array_equal(a.values, b.values)
        assert a.values.min() >= 2 and a.values.max() <= 6


class TestConvergenceMachinery:
    def test_project_nested_identity(self):
        values = np.arange(16.0)
        assert np.array_equal(xp.project_nested(values, 16), values)

    def test_project_nested_averages(self):
        values = np.array([1.0, 3.0, 5.0, 7.0])
        assert np.array_equal(xp.project_nested(values, 2), [2.0, 6.0])

    def test_non_nested_rejected(self):
        with pytest.raises(ValueError, match="not nested"):
            xp.project_nested(np.ones(10), 4)

    def test_tiny_convergence_study(self, tmp_path):
        cfg = xp.preset_config("testcase1", overrides={
            "run": {"out": str(tmp_path / "tc1")},
            "schedule": {"dt": "1e-2", "t_final": "1"},
            "testcase1": {"levels": "16,32", "reference": "64"},
        })
        report = xp.run_testcase_1(cfg)
        assert [lv.n_cells for lv in report.levels] == [16, 32]
        assert math.isnan(report.levels[0].l2_order)
        for lv in report.levels[1:]:
            assert 1.5 <= lv.l2_order <= 2.5
        assert (tmp_path / "tc1" / "convergence.csv").exists()
        assert (tmp_path / "tc1" / "entropy_reference.csv").exists()
        assert (tmp_path / "tc1" / "manifest.json").exists()

    def test_levels_must_nest(self):
        cfg = xp.preset_config("testcase1", overrides={
            "testcase1": {"levels": "12", "reference": "64"},
        })
        with pytest.raises(xp.ConfigError, match="nested"):
            xp.run_testcase_1(cfg)


class TestDeterminism:
    def test_testcase4_rerun_byte_identical(self, tmp_path):
        def once(out):
            cfg = xp.preset_config("testcase4", overrides={
                "run": {"out": str(out), "record_every": "3", "seed": "11",
                        "snapshot_times": "0.5"},
                "mesh": {"spacing": "1.2"},
                "schedule": {"dt": "0.1", "t_final": "1"},
            })
            xp.run_testcase_4(cfg)
            return {
                name: (out / name).read_bytes()
                for name in sorted(os.listdir(out))
                if name != "manifest.json"  # records the differing out path
            }

        a = once(tmp_path / "a")
        b = once(tmp_path / "b")
        assert a.keys() == b.keys()
        assert any(name.endswith(".csv") for name in a)
        for name in a:
            assert a[name] == b[name], name

    def test_seed_changes_output(self, tmp_path):
        def once(out, seed):
            cfg = xp.preset_config("testcase4", overrides={
                "run": {"out": str(out), "record_every": "5", "seed": str(seed),
                        "snapshot_times": ""},
                "mesh": {"spacing": "1.2"},
                "schedule": {"dt": "0.1", "t_final": "0.5"},
            })
            xp.run_testcase_4(cfg)
            return (out / "observables.csv").read_bytes()

        assert once(tmp_path / "a", 1) != once(tmp_path / "b", 2)


class TestOutputs:
    def test_snapshot_and_vtk(self, tmp_path):
        cfg = xp.preset_config("testcase3a", overrides={
            "run": {"out": str(tmp_path), "record_every": "2", "snapshot_times": "0.2"},
            "mesh": {"boundary_points": "48"},
            "schedule": {"dt": "0.1", "t_final": "0.4"},
        })
        xp.run_testcase_3(cfg)
        csv = (tmp_path / "snapshot_t0.2.csv").read_text().splitlines()
        assert csv[0] == "cell,x,y,u,v"
        vtk = (tmp_path / "snapshot_t0.2.vtk").read_text().splitlines()
        assert vtk[0] == "# vtk DataFile Version 2.0"
        assert "DATASET UNSTRUCTURED_GRID" in vtk
        norms = (tmp_path / "norms.csv").read_text().splitlines()
        assert norms[0] == "time,u_max,u_min,v_max,relative_entropy"

    def test_observables_roundtrip(self, tmp_path):
        cfg = xp.preset_config("testcase4", overrides={
            "run": {"out": str(tmp_path), "record_every": "2", "snapshot_times": ""},
            "mesh": {"spacing": "1.2"},
            "schedule": {"dt": "0.1", "t_final": "0.5"},
        })
        xp.run_testcase_4(cfg)
        data = ObservableSeries.read_csv(tmp_path / "observables.csv")
        assert set(data) == set(
            "time,u_mean,v_mean,entropy,dissipation,entropy_boltzmann,entropy_quadratic,"
            "entropy_cross,entropy_gradient,u_max,v_max,u_dual_norm,ugamma_l2_sq,"
            "dvdt_mean,dvdt_l2".split(",")
        )
        assert np.all(np.diff(data["time"]) > 0)


class TestSweep:
    def test_tiny_sweep_rows(self, tmp_path):
        cfg = xp.preset_config("testcase2", overrides={
            "run": {"out": str(tmp_path)},
            "mesh": {"n_cells": "24"},
            "schedule": {"segments": "1e-6 x 40, 1e-3 x 40"},
            "testcase2": {"eps_list": "1e-2,1e-3", "classes": "SWP,IP"},
        })
        rows = xp.run_testcase_2(cfg)
        by = {(r.preparedness, r.epsilon): r for r in rows}
        assert by[("SWP", 1e-2)].dtv_mean_l2 <= 1e-8
        assert by[("IP", 1e-3)].dtv_mean_l2 > by[("IP", 1e-2)].dtv_mean_l2
        assert (tmp_path / "ap_summary.csv").exists()
        assert (tmp_path / "apseries_ip_eps0.001.csv").exists()


class TestCLI:
    def test_eigen_command(self, capsys):
        assert cli_main(["eigen", "uniform1d:n=16", "--beta", "1", "--delta", "1"]) == 0
        out = capsys.readouterr().out
        assert "lambda_1" in out and "threshold" in out

    def test_check_mesh_command(self, capsys, tmp_path):
        dump = tmp_path / "mesh.txt"
        assert cli_main(["check-mesh", "uniform1d:n=8", "--zeta", "0.4", "--dump", str(dump)]) == 0
        out = capsys.readouterr().out
        assert "admissible (zeta=0.4): True" in out
        assert dump.exists()

    def test_run_invalid_target(self, capsys):
        assert cli_main(["run", "not-a-preset"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_run_custom_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[run]\ndriver = custom\nout = %s\n\n"
            "[params]\nepsilon = 1e-3\ndelta = 1e-3\nbeta = 0.1\n\n"
            "[mesh]\nkind = uniform1d\nn_cells = 16\n\n"
            "[schedule]\ndt = 0.1\nt_final = 0.5\n\n"
            "[initial]\nu = quartic\nv = zero\n" % (tmp_path / "out")
        )
        assert cli_main(["run", str(cfg)]) == 0
        assert (tmp_path / "out" / "observables.csv").exists()
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_cli_dt_override(self, tmp_path):
        assert cli_main([
            "run", "testcase1", "--out", str(tmp_path / "o"),
            "--dt", "0.05", "--tfinal", "0.2",
        ]) == 0
        # driver ran the convergence study at the tiny horizon
        assert (tmp_path / "o" / "convergence.csv").exists()
