"""Figure reproductions: run a named scenario, analyse it, check it, write reports.

Every default parameter and acceptance threshold comes from the versioned
``data/figures.json`` file; a run is fully determined by the figure id, the
seed and the overrides.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import rng as _rng
from .analysis import (
    extinction_db,
    extract_vpi_from_ramp,
    fit_envelope_sinusoid_spectrum,
    fit_gaussian_peak,
    fit_lorentzian_resonance,
    fit_sinusoid,
)
from .config import with_overrides
from .electrooptic import DriftModel, apply_dc_drift, drive_voltage_at, modulator_response, quadrature_visibility
from .errors import ConfigError
from .optics import (
    DET1,
    DET2,
    OUT1,
    OUT2,
    ResonatorSpec,
    extract_segment_losses,
    operating_wavelength,
    perimeter_average_loss,
    port_fractions,
    q_from_loss,
    resonator_transmission,
)
from .photon_mc import (
    DET_CHANNELS,
    Scenario,
    generate_arrivals,
    run_binned,
    run_scenario,
)
from .snspd import (
    compute_ocde,
    decay_time_from_trace,
    detection_efficiency,
    output_pulse_trace,
    process_arrivals,
)
from .timetag import fold_histogram, start_stop_histogram

FIGURES = ("fig2a", "fig2b", "fig2c", "fig3ab", "fig3cd", "fig3ef", "fig4ab", "fig4c", "fig4d", "fig5a", "fig5bc")


def load_defaults() -> dict:
    text = resources.files("lnbench").joinpath("data/figures.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ReproductionSpec:
    figure: str
    seed: int = 0
    overrides: dict[str, Any] = field(default_factory=dict)
    out_dir: str | None = None

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ConfigError("figure", f"unknown figure id {self.figure!r}; choose from {', '.join(FIGURES)}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")


@dataclass
class Table:
    columns: list[str]
    rows: list[list]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class Report:
    figure: str
    seed: int
    params: dict
    results: dict[str, Any]
    checks: list[dict]
    table: Table
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c["pass"] for c in self.checks)

    def summary(self) -> dict:
        return {
            "figure": self.figure,
            "seed": self.seed,
            "title": self.params.get("title", ""),
            "results": _clean(self.results),
            "checks": _clean(self.checks),
            "notes": list(self.notes),
            "pass": self.passed,
        }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


# --- parameter resolution ----------------------------------------------------


def resolve_params(spec: ReproductionSpec, defaults: dict | None = None) -> dict:
    """Full configuration of a run: scenario dict, analysis dict and checks."""
    defaults = load_defaults() if defaults is None else defaults
    fig = copy.deepcopy(defaults["figures"][spec.figure])
    scenario = _merge(Scenario().to_dict(), fig.get("scenario", {}))
    scenario["seed"] = spec.seed
    analysis = fig.get("analysis", {})
    for key, value in spec.overrides.items():
        root, _, rest = key.partition(".")
        if root == "scenario" and rest:
            scenario = with_overrides(scenario, {rest: value})
        elif root == "analysis" and rest:
            analysis = with_overrides(analysis, {rest: value})
        elif _has_path(analysis, key):
            analysis = with_overrides(analysis, {key: value})
        elif _has_path(scenario, key):
            scenario = with_overrides(scenario, {key: value})
        else:
            raise ConfigError(key, "unknown parameter for " + spec.figure)
    if scenario["seed"] != spec.seed:
        raise ConfigError("seed", "set the seed with the seed option, not an override")
    resolved = Scenario.from_dict(scenario)  # validate early; errors carry the field path
    if "operating_phase_rad" in analysis:
        lam = operating_wavelength(resolved.circuit, analysis["operating_phase_rad"], resolved.source.wavelength_nm)
        scenario = with_overrides(scenario, {"source.wavelength_nm": lam})
    return {
        "figure": spec.figure,
        "title": fig.get("title", ""),
        "defaults_version": defaults.get("version"),
        "seed": spec.seed,
        "scenario": scenario,
        "analysis": analysis,
        "checks": fig.get("checks", []),
    }


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            if k not in out:
                raise ConfigError(k, "unknown scenario field in figure defaults")
            out[k] = copy.deepcopy(v)
    return out


def _has_path(data, dotted: str) -> bool:
    node = data
    for k in dotted.split("."):
        if isinstance(node, dict) and k in node:
            node = node[k]
        elif isinstance(node, list) and k.isdigit() and int(k) < len(node):
            node = node[int(k)]
        else:
            return False
    return True


# --- checks ------------------------------------------------------------------


def evaluate_checks(checks: list[dict], results: dict) -> list[dict]:
    out = []
    for c in checks:
        metric = c["metric"]
        value = results.get(metric)
        entry = {"metric": metric, "measured": value}
        if "target" in c:
            target = c["target"]
            if "rel_tol" in c:
                tol = c["rel_tol"] * abs(target)
                entry.update(target=target, tolerance=tol, rel_tolerance=c["rel_tol"])
            elif "abs_tol_from" in c:
                tol = results[c["abs_tol_from"]]
                entry.update(target=target, tolerance=tol, tolerance_source=c["abs_tol_from"])
            else:
                tol = c["abs_tol"]
                entry.update(target=target, tolerance=tol)
            ok = value is not None and _finite(value) and abs(value - target) <= tol
        elif "min" in c:
            entry["minimum"] = c["min"]
            ok = value is not None and not _isnan(value) and value >= c["min"]
        elif "max" in c:
            entry["maximum"] = c["max"]
            ok = value is not None and not _isnan(value) and value <= c["max"]
        else:
            raise ConfigError(f"checks.{metric}", "needs target/min/max")
        bound = results.get(metric + "_is_lower_bound")
        if bound is not None:
            entry["lower_bound"] = bool(bound)
        reason = results.get(metric + "_invalid")
        if reason:
            entry["note"] = reason
            ok = False
        entry["pass"] = bool(ok)
        out.append(entry)
    return out


def _finite(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v)


def _isnan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)


# --- figure runners ----------------------------------------------------------


def _scenario(params: dict, **over) -> Scenario:
    data = params["scenario"]
    if over:
        data = with_overrides(data, over)
    return Scenario.from_dict(data)


def _operating_wavelength(params: dict, s: Scenario) -> float:
    return operating_wavelength(s.circuit, params["analysis"]["operating_phase_rad"], s.source.wavelength_nm)


def _resonance_samples(r: ResonatorSpec, a: dict, g: np.random.Generator):
    half = 0.5 * a["span_linewidths"] * r.linewidth_nm
    lam = np.linspace(r.resonance_nm - half, r.resonance_nm + half, int(a["n_points"]))
    clean = resonator_transmission(r, lam)
    n = a["counts_per_point"]
    noisy = g.poisson(n * clean) / n if n else clean
    return lam, clean, noisy


def run_resonance(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    seed = params["seed"]
    ng = params["scenario"]["circuit"]["group_index"]
    r = ResonatorSpec(group_index=ng, **a["resonator"])
    lam, clean, noisy = _resonance_samples(r, a, _rng.stream(seed, "resonance", "main"))
    fit = fit_lorentzian_resonance(lam, noisy)

    # straight/bend separation from a ring and a racetrack sharing the bend radius
    wl = r.resonance_nm
    a_s, a_b = a["alpha_straight_db_per_cm"], a["alpha_bend_db_per_cm"]
    q_ring = q_from_loss(a_b, wl, ng)
    q_track = q_from_loss(perimeter_average_loss(a_s, a_b, r.straight_arm_um, r.bend_radius_um), wl, ng)
    fitted = {}
    for name, q in (("ring", q_ring), ("racetrack", q_track)):
        kind = "ring" if name == "ring" else "racetrack"
        straight = 0.0 if kind == "ring" else r.straight_arm_um
        spec = ResonatorSpec(kind, r.bend_radius_um, straight, ng, q, q, wl)
        lam_k, _, y = _resonance_samples(spec, a, _rng.stream(seed, "resonance", name))
        fitted[name] = fit_lorentzian_resonance(lam_k, y).derived["intrinsic_q"]
    alpha_s, alpha_b = extract_segment_losses(
        fitted["ring"],
        fitted["racetrack"],
        bend_radius_um=r.bend_radius_um,
        straight_arm_um=r.straight_arm_um,
        wavelength_nm=wl,
        group_index=ng,
    )
    results = {
        "loaded_q": fit.derived["loaded_q"],
        "loaded_q_sigma": fit.sigmas["loaded_q"],
        "intrinsic_q": fit.derived["intrinsic_q"],
        "min_transmission": fit.derived["min_transmission"],
        "center_nm": fit.params["center_nm"],
        "fit_converged": fit.converged,
        "q_intrinsic_ring": fitted["ring"],
        "q_intrinsic_racetrack": fitted["racetrack"],
        "alpha_straight_db_per_cm": alpha_s,
        "alpha_bend_db_per_cm": alpha_b,
    }
    p = fit.params
    u = 2.0 * (lam - p["center_nm"]) / p["fwhm_nm"]
    model = p["baseline"] * (1.0 - p["depth"] / (1.0 + u * u))
    table = Table(["wavelength_nm", "transmission", "model", "fit"], [list(r_) for r_ in zip(lam, noisy, clean, model)])
    return results, table


def run_fig2c(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    s = _scenario(params)
    c = s.circuit
    lam = np.linspace(a["start_nm"], a["stop_nm"], int(a["n_points"]))
    fr = port_fractions(c, lam, np.pi * a["voltage"] / s.eom.v_pi(s.resolved_condition))
    g = c.grating.efficiency(lam)
    ref = g * g * (1.0 - a["reference_split"])
    scale = a["peak_counts"] / float(ref.max())
    gen = _rng.stream(params["seed"], "fig2c")
    ref_n = gen.poisson(ref * scale).astype(float)
    out1 = gen.poisson(fr[:, OUT1] * scale).astype(float)
    out2 = gen.poisson(fr[:, OUT2] * scale).astype(float)
    fits = {name: fit_envelope_sinusoid_spectrum(lam, ref_n, lam, y) for name, y in (("out1", out1), ("out2", out2))}
    # the port whose fringe maxima reach full transmission gives the device loss
    best = min(fits, key=lambda k: fits[k].derived["insertion_loss_db"])
    results = {
        "insertion_loss_db": fits[best].derived["insertion_loss_db"],
        "insertion_loss_sigma_db": fits[best].sigmas["insertion_loss_db"],
        "insertion_loss_db_out1": fits["out1"].derived["insertion_loss_db"],
        "insertion_loss_db_out2": fits["out2"].derived["insertion_loss_db"],
        "reported_port": best,
        "fringe_visibility_out1": fits["out1"].params["visibility"],
        "fringe_visibility_out2": fits["out2"].params["visibility"],
        "configured_insertion_loss_db": c.mzi.insertion_loss_db,
    }
    table = Table(["wavelength_nm", "reference_counts", "out1_counts", "out2_counts"], [list(r) for r in zip(lam, ref_n, out1, out2)])
    return results, table


def _cw_source(s: Scenario, flux: float):
    return replace(s.source, kind="cw", flux_photons_per_s=flux)


def run_fig3ab(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    s = _scenario(params)
    flux = s.source.flux_photons_per_s
    results: dict[str, Any] = {}
    arrivals = generate_arrivals(_cw_source(s, flux), s.duration_s, s.seed)
    window = (0, s.duration_ps)
    for ch, spec in zip(DET_CHANNELS, s.detectors):
        n = len(process_arrivals(spec, arrivals, window, s.seed, channel=ch))
        cr = n / s.duration_s
        results[f"count_rate_det{ch}"] = cr
        results[f"ocde_det{ch}"] = compute_ocde(cr, spec.dark_rate_cps, flux)
        results[f"configured_ocde_det{ch}"] = detection_efficiency(spec, spec.bias_current_ua)

    fracs = np.linspace(a["bias_fraction_start"], a["bias_fraction_stop"], int(a["bias_steps"]))
    sweep_arr = generate_arrivals(_cw_source(s, flux), a["sweep_duration_s"], _rng.sub_seed(s.seed, "bias-sweep"))
    sweep_win = (0, int(round(a["sweep_duration_s"] * 1e12)))
    cols = ["bias_fraction"]
    data = [fracs]
    monotone_model = True
    monotone_sim = True
    for ch, spec in zip(DET_CHANNELS, s.detectors):
        model = detection_efficiency(spec, fracs * spec.critical_current_ua)
        sim = []
        for f in fracs:
            d = replace(spec, bias_current_ua=float(f * spec.critical_current_ua))
            n = len(process_arrivals(d, sweep_arr, sweep_win, s.seed, channel=ch))
            sim.append(compute_ocde(max(n / a["sweep_duration_s"], d.dark_rate_cps), d.dark_rate_cps, flux))
        sim = np.array(sim)
        sigma = np.sqrt(np.maximum(sim, 1.0 / (flux * a["sweep_duration_s"])) / (flux * a["sweep_duration_s"]))
        monotone_model &= bool(np.all(np.diff(model) > 0))
        monotone_sim &= bool(np.all(np.diff(sim) >= -3.0 * np.hypot(sigma[1:], sigma[:-1])))
        plateau = model[(fracs >= a["plateau_start"]) & (fracs <= a["plateau_stop"])]
        dense = detection_efficiency(
            spec, np.linspace(a["plateau_start"], a["plateau_stop"], 101) * spec.critical_current_ua
        )
        results[f"plateau_flatness_det{ch}"] = float((dense.max() - dense.min()) / dense.max())
        results[f"plateau_points_det{ch}"] = int(plateau.size)
        cols += [f"ocde_model_det{ch}", f"ocde_sim_det{ch}"]
        data += [model, sim]
    results["model_monotone"] = float(monotone_model)
    results["simulated_monotone_3sigma"] = float(monotone_sim)
    results["flux_photons_per_s"] = flux
    return results, Table(cols, [list(r) for r in zip(*data)])


def run_fig3cd(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    s = _scenario(params)
    results: dict[str, Any] = {"sample_period_ns": a["sample_period_ps"] * 1e-3}
    traces = {}
    for ch, spec in zip(DET_CHANNELS, s.detectors):
        t, v = output_pulse_trace(
            0, a["sample_period_ps"], decay_time_ns=spec.decay_time_ns, rise_time_ps=spec.rise_time_ps, span_ns=a["span_ns"]
        )
        traces[ch] = (t, v)
        results[f"decay_time_ns_det{ch}"] = decay_time_from_trace(t, v)
        clicks = process_arrivals(spec, np.empty(0, dtype=np.int64), (0, s.duration_ps), s.seed, channel=ch)
        expected = spec.dark_rate_cps * s.duration_s
        results[f"dark_counts_det{ch}"] = len(clicks)
        results[f"dark_rate_cps_det{ch}"] = len(clicks) / s.duration_s
        results[f"dark_rate_z_det{ch}"] = abs(len(clicks) - expected) / math.sqrt(expected) if expected > 0 else 0.0
    t = traces[1][0]
    return results, Table(["time_ps", "volts_det1", "volts_det2"], [list(r) for r in zip(t, traces[1][1], traces[2][1])])


def run_fig3ef(params: dict) -> tuple[dict, Table]:
    """Detector-level start-stop timing: clicks start, delayed laser reference stops."""
    a = params["analysis"]
    s = _scenario(params)
    src = s.source
    if src.kind != "pulsed" or s.laser_reference_delay_ps is None:
        raise ConfigError("source.kind", "jitter measurement needs a pulsed source with a laser reference")
    results: dict[str, Any] = {}
    hists = {}
    for ch, spec in zip(DET_CHANNELS, s.detectors):
        rate = src.mean_rate * detection_efficiency(spec, spec.bias_current_ua)
        duration = a["n_events"] / rate
        window = (0, int(round(duration * 1e12)))
        arr = generate_arrivals(src, duration, _rng.sub_seed(s.seed, "jitter", ch))
        clicks = process_arrivals(spec, arr, window, s.seed, channel=ch)
        starts = clicks.sorted_recorded()
        stops = np.arange(0, window[1] + src.period_ps, src.period_ps, dtype=np.int64) + s.laser_reference_delay_ps
        h = start_stop_histogram(starts, stops, int(a["bin_width_ps"]), int(a["max_delta_ps"]))
        fit = fit_gaussian_peak(h)
        hists[ch] = h
        results[f"events_det{ch}"] = h.total
        results[f"jitter_fwhm_ps_det{ch}"] = fit.params["fwhm_ps"]
        results[f"jitter_fwhm_sigma_ps_det{ch}"] = fit.sigmas.get("fwhm_ps", 0.0)
        results[f"configured_jitter_fwhm_ps_det{ch}"] = spec.jitter_fwhm_ps
    h1, h2 = hists[1], hists[2]
    return results, Table(["delay_ps", "counts_det1", "counts_det2"], [list(r) for r in zip(h1.bin_starts_ps, h1.counts, h2.counts)])


def run_fig4ab(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    s = _scenario(params)
    s = _scenario(params, **{"source.wavelength_nm": _operating_wavelength(params, s)})
    res = run_scenario(s)
    period = s.drive.period_ps
    results: dict[str, Any] = {"photons_det1": res.photons_at_detector[1], "photons_det2": res.photons_at_detector[2]}
    hists = {}
    for ch in DET_CHANNELS:
        h = fold_histogram(res.tags[ch], period, 0, int(a["bin_width_ps"]))
        fit = extract_vpi_from_ramp(h, s.drive)
        hists[ch] = h
        results[f"v_pi_det{ch}"] = fit.params["v_pi"]
        results[f"v_pi_sigma_det{ch}"] = fit.sigmas["v_pi"]
        results[f"counts_det{ch}"] = h.total
    results["configured_v_pi"] = s.eom.v_pi(s.resolved_condition)
    results["v_pi_length_vcm"] = results["v_pi_det2"] * s.eom.electrode_length_mm / 10.0
    volts = drive_voltage_at(s.drive, hists[1].bin_centers_ps * 1e-12)
    rows = [list(r) for r in zip(hists[1].bin_starts_ps, volts, hists[1].counts, hists[2].counts)]
    return results, Table(["bin_start_ps", "voltage", "counts_det1", "counts_det2"], rows)


def run_fig4c(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    base = _scenario(params)
    lam = _operating_wavelength(params, base)
    volts = np.linspace(a["v_start"], a["v_stop"], int(a["steps"]))

    def counts_at(v: float, label) -> tuple[int, int]:
        s = _scenario(
            params,
            **{"source.wavelength_nm": lam, "drive.offset_volts": float(v), "seed": _rng.sub_seed(base.seed, "fig4c", label)},
        )
        r = run_scenario(s)
        return int(r.tags[1].size), int(r.tags[2].size)

    rows = [[v, *counts_at(v, i)] for i, v in enumerate(volts)]
    on = counts_at(a["v_on"], "on")
    off = counts_at(a["v_off"], "off")
    results: dict[str, Any] = {"operating_wavelength_nm": lam}
    # Det1 is bright at v_on, Det2 at v_off
    for ch, hi, lo in ((1, on[0], off[0]), (2, off[1], on[1])):
        spec = base.detectors[ch - 1]
        floor = spec.dark_rate_cps * base.duration_s
        ext = extinction_db(max(hi, 1), lo, floor)
        results[f"extinction_db_det{ch}"] = ext.db
        results[f"extinction_db_det{ch}_is_lower_bound"] = ext.lower_bound
        results[f"extinction_det{ch}_text"] = str(ext)
        results[f"counts_on_det{ch}"] = hi
        results[f"counts_off_det{ch}"] = lo
    phase = lambda v: np.pi * v / base.eom.v_pi(base.resolved_condition)  # noqa: E731
    p_on = port_fractions(base.circuit, lam, phase(a["v_on"]))
    p_off = port_fractions(base.circuit, lam, phase(a["v_off"]))
    results["extinction_db_det1_model"] = 10.0 * math.log10(p_on[DET1] / p_off[DET1])
    results["extinction_db_det2_model"] = (
        10.0 * math.log10(p_off[DET2] / p_on[DET2]) if p_on[DET2] > 0 else math.inf
    )
    return results, Table(["voltage", "counts_det1", "counts_det2"], rows)


def run_fig4d(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    base = _scenario(params)
    s = _scenario(params, **{"source.wavelength_nm": _operating_wavelength(params, base)})
    starts, counts = run_binned(s, a["bin_s"])
    results: dict[str, Any] = {"n_bins": int(counts.shape[0])}
    det = counts[:, 1]
    if counts.shape[0] == 0 or det.min() < a["min_counts_per_bin"]:
        results["max_deviation_db"] = math.nan
        results["max_deviation_db_invalid"] = "insufficient counts for 0.05 dB criterion"
        results["min_counts_per_bin"] = int(det.min()) if counts.shape[0] else 0
    else:
        mean = float(det.mean())
        dev = 10.0 * np.log10(det / mean)
        results["max_deviation_db"] = float(np.abs(dev).max())
        results["min_counts_per_bin"] = int(det.min())
        results["mean_counts_per_bin"] = mean
        results["poisson_sigma_db"] = 10.0 / math.log(10.0) / math.sqrt(mean)
    rt = DriftModel("rt_screened", a["rt_tau_screen_s"])
    v0 = float(apply_dc_drift(rt, a["rt_offset_volts"], 0.0))
    v1 = float(apply_dc_drift(rt, a["rt_offset_volts"], a["rt_window_s"]))
    results["rt_relaxation_fraction"] = 1.0 - v1 / v0
    return results, Table(["bin_start_s", "counts_det1", "counts_det2"], [[t, *c] for t, c in zip(starts, counts)])


def run_fig5a(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    eom = _scenario(params).eom
    f = np.geomspace(a["f_start_hz"], a["f_stop_hz"], int(a["n_points"]))
    s21 = 20.0 * np.log10(modulator_response(eom, f))
    i = int(np.flatnonzero(s21 <= -20.0 * math.log10(math.sqrt(2.0)))[0])
    # interpolate the -3.01 dB crossing in log frequency
    target = -10.0 * math.log10(2.0)
    x0, x1 = math.log10(f[i - 1]), math.log10(f[i])
    y0, y1 = s21[i - 1], s21[i]
    f3 = 10 ** (x0 + (target - y0) * (x1 - x0) / (y1 - y0))
    results = {
        "f3db_ghz": f3 * 1e-9,
        "response_at_probe": float(modulator_response(eom, a["probe_frequency_hz"])),
        "configured_f3db_ghz": eom.f3db_ghz,
    }
    return results, Table(["frequency_hz", "s21_db"], [list(r) for r in zip(f, s21)])


def run_fig5bc(params: dict) -> tuple[dict, Table]:
    a = params["analysis"]
    base = _scenario(params)
    lam = _operating_wavelength(params, base)
    results: dict[str, Any] = {"operating_wavelength_nm": lam}
    rows = []
    for run in a["runs"]:
        label = run["label"]
        s = _scenario(
            params,
            **{
                "source.wavelength_nm": lam,
                "drive.frequency_hz": run["frequency_hz"],
                "seed": _rng.sub_seed(base.seed, "fig5bc", label),
            },
        )
        res = run_scenario(s)
        h = fold_histogram(res.tags[2], s.drive.period_ps, 0, int(run["bin_width_ps"]))
        fit = fit_sinusoid(h)
        response = float(modulator_response(s.eom, run["frequency_hz"]))
        v_pa, v_st = quadrature_visibility(s.drive.vpp, s.eom.v_pi(s.resolved_condition), response)
        results[f"visibility_{label}"] = fit.derived["v_over_max"]
        results[f"visibility_standard_{label}"] = fit.derived["v_standard"]
        results[f"visibility_analytic_{label}"] = v_pa
        results[f"visibility_standard_analytic_{label}"] = v_st
        results[f"counts_det2_{label}"] = h.total
        rows += [[label, b, c] for b, c in zip(h.bin_starts_ps, h.counts)]
    return results, Table(["run", "bin_start_ps", "counts_det2"], rows)


def figure_scenario(figure: str, seed: int = 0, overrides: dict | None = None) -> Scenario:
    """The Monte Carlo scenario behind a figure, at its operating wavelength."""
    return _scenario(resolve_params(ReproductionSpec(figure, seed, dict(overrides or {}))))


RUNNERS: dict[str, Callable[[dict], tuple[dict, Table]]] = {
    "fig2a": run_resonance,
    "fig2b": run_resonance,
    "fig2c": run_fig2c,
    "fig3ab": run_fig3ab,
    "fig3cd": run_fig3cd,
    "fig3ef": run_fig3ef,
    "fig4ab": run_fig4ab,
    "fig4c": run_fig4c,
    "fig4d": run_fig4d,
    "fig5a": run_fig5a,
    "fig5bc": run_fig5bc,
}


def run_reproduction(spec: ReproductionSpec, defaults: dict | None = None) -> Report:
    params = resolve_params(spec, defaults)
    try:
        results, table = RUNNERS[spec.figure](params)
    except ConfigError:
        raise
    except (ValueError, RuntimeError) as exc:
        raise RuntimeError(f"{spec.figure}: {type(exc).__name__}: {exc}") from exc
    checks = evaluate_checks(params["checks"], results)
    notes = [c["note"] for c in checks if "note" in c]
    return Report(spec.figure, spec.seed, params, results, checks, table, notes)


def emit_reports(report: Report, out_dir: str | Path) -> Path:
    """Write ``<out_dir>/<figure>/{data.csv, summary.json, params.json}``."""
    target = Path(out_dir) / report.figure
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / "data.csv").write_text(report.table.to_csv())
        (target / "summary.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
        (target / "params.json").write_text(json.dumps(_clean(report.params), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write reports under {target}: {exc}") from exc
    return target
