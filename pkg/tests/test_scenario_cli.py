import csv
import math

import numpy as np
import pytest
import yaml

from edchrom.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, fmt, main
from edchrom.integrators import SchemeKind
from edchrom.scenario import (
    PRESETS,
    ScenarioError,
    emit_scenario,
    load_preset,
    parse_scenario,
    preset_dict,
    scenario_from_dict,
    scenario_to_dict,
)


def write(tmp_path, doc, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc) if isinstance(doc, dict) else doc)
    return path


class TestPresets:
    def test_single_elution(self):
        cfg = load_preset("single_elution").config
        assert cfg.physics.u == 1.0 and cfg.physics.Da == 0.0
        np.testing.assert_array_equal(cfg.iso.a, [1.0])
        np.testing.assert_array_equal(cfg.iso.b, [1.0])
        assert cfg.iso.epsilon == 0.5
        (seg,) = cfg.injection.segments
        assert (seg.t_start, seg.t_end, seg.c) == (0.0, 0.2, (1.0,))
        assert cfg.snapshots == (0.5, 1.0, 1.4)

    def test_displacement_exp1(self):
        scn = load_preset("displacement_exp1")
        cfg = scn.config
        np.testing.assert_array_equal(cfg.iso.a, [4, 5, 6])
        np.testing.assert_array_equal(cfg.iso.b, [4, 5, 1])
        assert cfg.physics.u == 0.2 and cfg.physics.Nt == 10000
        assert cfg.physics.Da == pytest.approx(1e-5)
        np.testing.assert_array_equal(cfg.injection(0.05), [1, 1, 0])
        np.testing.assert_array_equal(cfg.injection(0.1), [0, 0, 1])
        np.testing.assert_array_equal(cfg.injection(1e6), [0, 0, 1])
        assert scn.displacer == 2 and cfg.dt_over_dz == 4.0

    @pytest.mark.parametrize("name,c3", [("displacement_exp2", 0.5), ("displacement_exp3", 0.1)])
    def test_displacer_levels(self, name, c3):
        assert load_preset(name).config.injection(1.0)[2] == c3

    def test_variants_and_stability_sweep(self):
        assert load_preset("single_elution_da0005").config.physics.Da == 0.0005
        assert load_preset("single_elution_da005").config.physics.Da == 0.005
        cfg = load_preset("stability_sweep").config
        assert cfg.scheme is SchemeKind.EXPLICIT_RK2 and cfg.physics.Da == 0.0005

    def test_unknown_preset(self):
        with pytest.raises(ScenarioError):
            load_preset("nope")


class TestSchema:
    def test_missing_epsilon(self, tmp_path):
        doc = preset_dict("single_elution")
        del doc["isotherm"]["epsilon"]
        with pytest.raises(ScenarioError, match="isotherm.epsilon"):
            parse_scenario(write(tmp_path, doc))

    @pytest.mark.parametrize("mutate,key", [
        (lambda d: d["grid"].update(cells=5), "grid"),
        (lambda d: d.update(extra=1), "scenario"),
        (lambda d: d["physics"].update(Nt=100.0), "physics"),
        (lambda d: d["physics"].pop("Da"), "physics"),
        (lambda d: d["isotherm"].update(a=[2.0, 1.0], b=[1.0, 1.0]), "isotherm.a"),
        (lambda d: d["isotherm"].update(epsilon=1.5), "isotherm.epsilon"),
        (lambda d: d["grid"].update(m=3), "grid.m"),
        (lambda d: d["time"].update(snapshots=[9.0]), "time.snapshots"),
        (lambda d: d["scheme"].update(kind="rk4"), "scheme.kind"),
        (lambda d: d["injection"]["segments"][0].update(c=[1.0, 2.0]), "injection.segments[0].c"),
        (lambda d: d["injection"]["segments"][0].update(t_end=-1.0), "injection.segments[0]"),
        (lambda d: d["time"].update(dt_over_dz="fast"), "time.dt_over_dz"),
    ])
    def test_violations_name_the_key(self, mutate, key):
        doc = preset_dict("single_elution")
        mutate(doc)
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(doc)
        assert key in str(err.value)

    def test_yaml_exponent_strings_accepted(self, tmp_path):
        text = emit_scenario(load_preset("single_elution")).replace("1.0e-12", "1e-12")
        assert parse_scenario(write(tmp_path, text)).config.newton.tol == 1e-12

    def test_nt_gives_da(self):
        doc = preset_dict("single_elution")
        doc["physics"] = {"u": 1.0, "Nt": 500.0}
        assert scenario_from_dict(doc).config.physics.Da == pytest.approx(0.001)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_round_trip(self, tmp_path, name):
        scn = load_preset(name)
        text = emit_scenario(scn)
        again = parse_scenario(write(tmp_path, text))
        assert scenario_to_dict(again) == scenario_to_dict(scn)
        assert emit_scenario(again) == text
        a, b = scn.config, again.config
        assert np.array_equal(a.iso.a, b.iso.a) and np.array_equal(a.iso.b, b.iso.b)
        assert (a.grid, a.physics, a.injection, a.newton) == (b.grid, b.physics, b.injection, b.newton)
        assert (a.dt_over_dz, a.t_final, a.snapshots, a.scheme, a.sampling, a.rho_tol) == \
               (b.dt_over_dz, b.t_final, b.snapshots, b.scheme, b.sampling, b.rho_tol)

    def test_infinite_segment_round_trips(self):
        text = emit_scenario(load_preset("displacement_exp2"))
        assert ".inf" in text
        assert math.isinf(scenario_from_dict(yaml.safe_load(text)).config.injection.segments[1].t_end)


class TestCli:
    def test_check_stability(self, capsys):
        assert main(["--preset", "stability_sweep", "--m", "500", "--check-stability"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "0.6667" in out and "1.0000" in out

    def test_single_elution_files(self, tmp_path):
        rc = main(["--preset", "single_elution", "--m", "100", "--dt-over-dz", "0.9",
                   "--scheme", "imex-rk2", "--out-dir", str(tmp_path)])
        assert rc == EXIT_OK
        for t in ("0.5", "1", "1.4"):
            with open(tmp_path / f"single_elution_t{t}.csv") as fh:
                rows = list(csv.reader(fh))
            assert rows[0] == ["z", "c_1", "w_1"] and len(rows) == 101
        with open(tmp_path / "single_elution_diagnostics.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["time", "mass_1", "oscillation_index", "front_position"]
        masses = [float(r["mass_1"]) for r in rows]
        # the pulse is inside the column at T = 0.5 and 1.0; by 1.4 its
        # smeared front has started to leave (a few 1e-7), still 0.207 to 3 digits
        assert masses[1] == pytest.approx(masses[0], rel=1e-12)
        assert all(m == pytest.approx(0.207, abs=0.005) for m in masses)

    def test_deterministic_output(self, tmp_path):
        args = ["--preset", "stability_sweep", "--t-final", "0.3"]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out-dir", str(tmp_path / "b")]) == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == ["stability_sweep_diagnostics.csv", "stability_sweep_t0.3.csv"]
        for n in names:
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()

    def test_seventeen_digits(self):
        assert fmt(0.1) == "0.10000000000000001"
        assert float(fmt(1 / 3)) == 1 / 3

    def test_displacement_operating_line(self, tmp_path, capsys):
        rc = main(["--preset", "displacement_exp3", "--m", "50", "--t-final", "0.5",
                   "--out-dir", str(tmp_path)])
        assert rc == EXIT_OK
        with open(tmp_path / "displacement_exp3_operating_line.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["plateau_flag"] for r in rows] == ["false", "false"]
        assert "plateau flags {1: False, 2: False}" in capsys.readouterr().out

    def test_config_errors_exit_2(self, tmp_path):
        assert main(["--preset", "nope"]) == EXIT_CONFIG
        assert main(["--scenario", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
        assert main(["--preset", "single_elution", "--m", "2"]) == EXIT_CONFIG
        assert main(["--scheme", "imex-rk2"]) == EXIT_CONFIG
        doc = preset_dict("single_elution")
        del doc["isotherm"]["epsilon"]
        assert main(["--scenario", str(write(tmp_path, doc))]) == EXIT_CONFIG

    def test_numerical_failure_exit_1(self, tmp_path, capsys):
        doc = preset_dict("stability_sweep")
        doc["grid"]["m"] = 200
        doc["time"].update(dt_over_dz=1.5, t_final=0.5, snapshots=[0.5])
        doc["scheme"]["undershoot_tol"] = 0.0
        rc = main(["--scenario", str(write(tmp_path, doc)), "--out-dir", str(tmp_path)])
        assert rc == EXIT_NUMERICAL
        assert "numerical failure at t=" in capsys.readouterr().err
