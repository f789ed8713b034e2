from __future__ import annotations

import json
import math

import numpy as np
import pytest

from lnbench.cli import main
from lnbench.electrooptic import DriveWaveform, drive_voltage_at
from lnbench.errors import ConfigError
from lnbench.harness import (
    FIGURES,
    ReproductionSpec,
    emit_reports,
    evaluate_checks,
    figure_scenario,
    load_defaults,
    resolve_params,
    run_reproduction,
)
from lnbench.optics import ResonatorSpec, resonator_transmission
from lnbench.photon_mc import Scenario, load_scenario, save_scenario
from lnbench.timetag import Histogram


@pytest.fixture(scope="module")
def reports(tmp_path_factory):
    out = tmp_path_factory.mktemp("reports")
    return {f: run_reproduction(ReproductionSpec(f)) for f in FIGURES}, out


def test_defaults_file_covers_every_figure():
    d = load_defaults()
    assert set(d["figures"]) == set(FIGURES)
    for fig in d["figures"].values():
        assert fig["checks"], fig["title"]


@pytest.mark.parametrize("figure", FIGURES)
def test_every_figure_passes_on_defaults(reports, figure):
    rep = reports[0][figure]
    assert rep.passed, rep.checks


def test_summary_schema(reports):
    rep = reports[0]["fig4c"]
    summary = rep.summary()
    assert summary["figure"] == "fig4c" and summary["seed"] == 0
    for c in summary["checks"]:
        assert "measured" in c and "pass" in c
        assert {"target", "tolerance"} <= set(c) or "minimum" in c or "maximum" in c
    json.dumps(summary, allow_nan=False)


def test_emit_layout_and_byte_determinism(tmp_path):
    spec = ReproductionSpec("fig4ab", seed=3, overrides={"duration_s": 2.0})
    a = emit_reports(run_reproduction(spec), tmp_path / "a")
    b = emit_reports(run_reproduction(spec), tmp_path / "b")
    for name in ("data.csv", "summary.json", "params.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    again = emit_reports(run_reproduction(spec), tmp_path / "a")
    assert (again / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    header = (a / "data.csv").read_text().splitlines()[0]
    assert header.startswith("bin_start_ps")


def test_seed_changes_output(tmp_path):
    a = run_reproduction(ReproductionSpec("fig3ef", seed=1)).summary()
    b = run_reproduction(ReproductionSpec("fig3ef", seed=2)).summary()
    assert a["results"] != b["results"]


@pytest.mark.parametrize("figure", ["fig4ab", "fig5bc", "fig3ef"])
def test_params_json_round_trips_to_scenario(reports, figure):
    out = emit_reports(reports[0][figure], reports[1])
    assert load_scenario(out / "params.json") == figure_scenario(figure)


def test_params_record_operating_wavelength():
    p = resolve_params(ReproductionSpec("fig4ab"))
    s = Scenario.from_dict(p["scenario"])
    assert s.source.wavelength_nm != 1550.0
    assert abs(s.source.wavelength_nm - 1550.0) < 1.0


def test_insufficient_counts_is_a_fail_not_a_fake_pass():
    rep = run_reproduction(ReproductionSpec("fig4d", overrides={"duration_s": 1.0}))
    assert not rep.passed
    assert any("insufficient counts for 0.05 dB criterion" in n for n in rep.notes)


class TestOverrides:
    def test_analysis_and_scenario_keys(self):
        p = resolve_params(ReproductionSpec("fig4c", overrides={"v_off": 17.0, "duration_s": 0.2}))
        assert p["analysis"]["v_off"] == 17.0 and p["scenario"]["duration_s"] == 0.2

    def test_explicit_prefix(self):
        p = resolve_params(ReproductionSpec("fig4c", overrides={"scenario.source.flux_photons_per_s": 2e6}))
        assert p["scenario"]["source"]["flux_photons_per_s"] == 2e6

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            resolve_params(ReproductionSpec("fig4c", overrides={"bogus.key": 1}))
        assert exc.value.field == "bogus.key"

    def test_invalid_value_reports_field(self):
        with pytest.raises(ConfigError) as exc:
            resolve_params(ReproductionSpec("fig4c", overrides={"duration_s": -1}))
        assert exc.value.field == "duration_s"

    def test_seed_via_override_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            resolve_params(ReproductionSpec("fig4c", overrides={"seed": 5}))

    def test_unknown_figure(self):
        with pytest.raises(ConfigError, match="unknown figure"):
            ReproductionSpec("fig9z")


def test_evaluate_checks():
    checks = [
        {"metric": "a", "target": 10.0, "rel_tol": 0.1},
        {"metric": "b", "min": 30.0},
        {"metric": "c", "max": 1.0},
        {"metric": "d", "target": 1.0, "abs_tol_from": "d_tol"},
    ]
    out = evaluate_checks(checks, {"a": 10.5, "b": math.inf, "b_is_lower_bound": True, "c": float("nan"), "d": 1.2, "d_tol": 0.1})
    assert [c["pass"] for c in out] == [True, True, False, False]
    assert out[1]["lower_bound"] is True
    assert out[3]["tolerance_source"] == "d_tol"


class TestCli:
    def test_run_pass_exit_code(self, tmp_path, capsys):
        assert main(["run", "fig5a", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "PASS fig5a f3db_ghz" in out
        assert (tmp_path / "fig5a" / "summary.json").exists()

    def test_run_fail_exit_code(self, tmp_path, capsys):
        assert main(["run", "fig4d", "--set", "duration_s=1", "--out", str(tmp_path)]) == 1
        assert "insufficient counts" in capsys.readouterr().out

    def test_bad_override_exit_code(self, tmp_path, capsys):
        assert main(["run", "fig4c", "--set", "nope=1", "--out", str(tmp_path)]) == 2
        assert "nope" in capsys.readouterr().err

    def test_unknown_figure_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["run", "fig9z"])

    def test_fit_lorentzian(self, tmp_path, capsys):
        r = ResonatorSpec(intrinsic_q=1.04e6, coupling_q=1.04e6)
        lam = np.linspace(1549.98, 1550.02, 401)
        rows = "\n".join(f"{float(x)!r},{float(y)!r}" for x, y in zip(lam, resonator_transmission(r, lam)))
        path = tmp_path / "res.csv"
        path.write_text("wavelength_nm,transmission\n" + rows + "\n")
        assert main(["fit", "lorentzian", str(path)]) == 0
        fit = json.loads(capsys.readouterr().out)
        assert fit["params"]["loaded_q"] == pytest.approx(5.2e5, rel=1e-6)

    def test_fit_vpi_ramp(self, tmp_path, capsys):
        ramp = DriveWaveform("ramp", 20.0, 1e3)
        starts = np.arange(500) * 2_000_000
        v = drive_voltage_at(ramp, (starts + 1_000_000) * 1e-12)
        counts = np.rint(1e6 * 0.5 * (1 + np.cos(np.pi * v / 17.8 + 1.0)))
        path = tmp_path / "h.csv"
        path.write_text(Histogram(2_000_000, 0, counts, ramp.period_ps).to_csv())
        assert main(["fit", "vpi-ramp", str(path), "--vpp", "20", "--frequency", "1000"]) == 0
        assert json.loads(capsys.readouterr().out)["params"]["v_pi"] == pytest.approx(17.8, rel=1e-6)

    def test_fit_missing_ramp_args(self, tmp_path, capsys):
        path = tmp_path / "h.csv"
        path.write_text(Histogram(10, 0, [1, 2, 3]).to_csv())
        assert main(["fit", "vpi-ramp", str(path)]) == 2
        assert "--vpp" in capsys.readouterr().err

    def test_fit_sinusoid(self, tmp_path, capsys):
        c = np.rint(1000 * (1 + 0.5 * np.cos(2 * np.pi * (np.arange(20) + 0.5) / 20)))
        path = tmp_path / "s.csv"
        path.write_text(Histogram(50, 0, c).to_csv())
        assert main(["fit", "sinusoid", str(path), "--period-ps", "1000"]) == 0
        fit = json.loads(capsys.readouterr().out)
        assert fit["params"]["v_over_max"] == pytest.approx(2 / 3, abs=1e-3)

    def test_sweep(self, tmp_path, capsys):
        sc = tmp_path / "sc.json"
        save_scenario(Scenario(duration_s=0.01, drive=DriveWaveform("dc")), sc)
        out = tmp_path / "sweep.csv"
        assert main(["sweep", str(sc), "--param", "drive.offset_volts", "--from", "0", "--to", "16.5", "--steps", "3", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("drive.offset_volts,counts_det1,counts_det2")
        assert len(lines) == 4

    def test_sweep_bad_param(self, tmp_path, capsys):
        sc = tmp_path / "sc.json"
        save_scenario(Scenario(duration_s=0.01), sc)
        assert main(["sweep", str(sc), "--param", "drive.nope", "--from", "0", "--to", "1", "--steps", "2"]) == 2
