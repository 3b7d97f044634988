"""Command-line front end.

Every subcommand is a thin composition of library calls; the only
arithmetic here is scaling flag values into SI units.  Results go to files
(CSV/JSON, plot-ready) in the output directory, a short summary goes to
stdout and every run writes a ``<command>.manifest.json`` that
``--replay`` can re-execute.

Exit codes: 0 success, 1 invalid input, 2 non-convergence or numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, calibration, data_io, oracle, presets
from .errors import ConvergenceError, IntegratorError, TruncationError, ValidationError
from .fitting import procedures
from .model import Channel, DeviceParams, QubitTuning, coupling_set, transmission_spectrum
from .units import GHZ, KHZ, MHZ, MILLIKELVIN, MILLIVOLT, PICOWATT

ENV_OUT_DIR = "DQDCAVITY_OUT_DIR"


class _UsageError(Exception):
    pass


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except for options that are unset unless given."""

    def _get_help_string(self, action):
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


@dataclass
class Outcome:
    summary: str
    outputs: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    converged: bool = True
    seed: int | None = None


# ---------------------------------------------------------------- helpers


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _device(args, dataset: str = "pair-P3") -> DeviceParams:
    if getattr(args, "device", None):
        return data_io.read_device(args.device).device
    dev = presets.synthetic_setup(dataset).device
    g0 = getattr(args, "g0_mhz", None)
    kappa = getattr(args, "kappa_khz", None)
    if g0 is None and kappa is None:
        return dev
    return DeviceParams(
        fr=dev.fr,
        kappa=dev.kappa if kappa is None else kappa * KHZ,
        g0=dev.g0 if g0 is None else g0 * MHZ,
        z0r=dev.z0r,
        z0g=dev.z0g,
        alpha_p2_eps=dev.alpha_p2_eps,
        alpha_p3_eps=dev.alpha_p3_eps,
        alpha_s1_eps=dev.alpha_s1_eps,
    )


def _report_fit(res, name) -> str:
    lines = [f"{name}: converged={res.converged} ({res.message}), iterations={res.n_iterations}"]
    for n in res.fitted_names:
        lines.append(f"  {n:<8} = {res.best_fit[n]:.6g} +/- {res.sigma[n]:.2g}")
    return "\n".join(lines)


# ---------------------------------------------------------------- simulate


def cmd_simulate_linecut(args) -> Outcome:
    dataset = args.dataset or f"pair-{args.channel}"
    setup = presets.synthetic_setup(dataset)
    if setup.settings.channel.value != args.channel:
        raise ValidationError(f"data set {dataset} is driven through {setup.settings.channel.value}")
    device = _device(args, dataset)
    tc = setup.tc if args.tc_ghz is None else args.tc_ghz * GHZ
    sigma0 = presets.NOISE_SIGMA0 if args.sigma0_v is None else args.sigma0_v
    grid = data_io.symmetric_grid(args.span_ueV, args.n_points)
    lc = data_io.generate_linecut(
        device, tc, setup.settings, grid, data_io.NoiseModel(sigma0, args.seed), args.dc_offset_v, setup.c
    )
    out = _out_dir(args).joinpath(args.output or f"linecut_{dataset}_seed{args.seed}.csv")
    data_io.write_linecut(out, lc)
    return Outcome(
        f"wrote {len(lc)}-point {args.channel} line cut ({dataset}, <n>={lc.meta['n_photons']:.1f}, "
        f"noise sigma={lc.meta['noise_sigma']:.3g} V) to {out}",
        outputs=[out],
        seed=args.seed,
    )


def cmd_simulate_diagram(args) -> Outcome:
    dataset = args.dataset or f"pair-{args.channel}"
    setup = presets.synthetic_setup(dataset)
    device = _device(args, dataset)
    span = args.span_mv * MILLIVOLT
    vp2 = data_io.symmetric_grid(span, args.n_points)
    vp3 = data_io.symmetric_grid(span, args.n_points)
    sigma0 = 0.0 if args.sigma0_v is None else args.sigma0_v
    dia = data_io.generate_diagram(
        device, setup.tc, setup.settings, vp2, vp3, (0.0, 0.0), setup.c, data_io.NoiseModel(sigma0, args.seed)
    )
    out = _out_dir(args).joinpath(args.output or f"diagram_{dataset}.csv")
    data_io.write_diagram(out, dia)
    return Outcome(f"wrote {args.n_points}x{args.n_points} diagram to {out}", outputs=[out], seed=args.seed)


def cmd_simulate_spectrum(args) -> Outcome:
    device = _device(args)
    eps_q = args.eps_q_mhz * MHZ
    cs = coupling_set(QubitTuning(args.eps0_ghz * GHZ, args.tc_ghz * GHZ), device.g0, eps_q)
    spec = transmission_spectrum(cs, args.eps_r_khz * KHZ, device.kappa, device.fr, args.span_khz * KHZ, args.n_points)
    out = _out_dir(args).joinpath(args.output or "spectrum.csv")
    data_io.write_spectrum(out, spec)
    return Outcome(
        f"peak at {spec.peak_center_hz:.6f} Hz (dispersive shift {cs.delta_omega / KHZ:.3f} kHz); wrote {out}",
        outputs=[out],
    )


def cmd_simulate_thermal(args) -> Outcome:
    temps = [t * MILLIKELVIN for t in args.t_mc_mk]
    scans = data_io.generate_thermal_series(
        args.alpha_ev_per_v, args.te0_mk * MILLIKELVIN, temps,
        v_span=args.span_mv * MILLIVOLT, n_points=args.n_points, noise_frac=args.noise_frac, seed=args.seed,
    )
    outdir = _out_dir(args)
    outs = []
    for scan, t_mk in zip(scans, args.t_mc_mk):
        path = outdir.joinpath(f"thermal_{t_mk:g}mK.csv")
        data_io.write_thermal_scan(path, scan)
        outs.append(path)
    return Outcome(f"wrote {len(outs)} thermal scans to {outdir}", outputs=outs, seed=args.seed)


# ---------------------------------------------------------------- fit


def cmd_fit_linecut(args) -> Outcome:
    device = _device(args)
    s1 = data_io.read_linecut(args.s1) if args.s1 else None
    p3 = data_io.read_linecut(args.p3) if args.p3 else None
    res = procedures.simultaneous_fit(s1, p3, device.g0, device.kappa, n_starts=args.starts)
    outdir = _out_dir(args)
    report = outdir.joinpath(args.output or "fit_linecut.json")
    curves = res.extras.pop("curves")
    data_io.write_fit_report(report, res, {"inputs": [str(args.s1), str(args.p3)]})
    outs = [report]
    for ch, cv in curves.items():
        path = outdir.joinpath(f"fit_linecut_{ch}_curves.csv")
        data_io.write_columns(path, cv)
        outs.append(path)
    bg = res.extras["background"]
    summary = "\n".join([
        _report_fit(res, "simultaneous S1+P3 fit"),
        f"  background S1 = {bg['S1']:.6g} V, P3 = {bg['P3']:.6g} V (ratio {res.extras['background_ratio']:.3f})",
    ])
    return Outcome(summary, outputs=outs, inputs=[args.s1, args.p3], converged=res.converged)


def cmd_fit_peaks(args) -> Outcome:
    device = _device(args, "tc-iv")
    cuts = [data_io.read_linecut(p) for p in args.inputs]
    results = procedures.per_peak_fit(
        cuts, beta3=args.beta3, beta2=args.beta2, g0=device.g0, kappa=device.kappa,
        n_starts=args.starts, threads=args.threads,
    )
    outdir = _out_dir(args)
    outs = []
    rows = {"tc_hz": [], "tc_sigma_hz": [], "c_eps3": [], "c_eps3_sigma": [], "peak_contrast_v": []}
    summary = []
    for k, (path, res) in enumerate(zip(args.inputs, results)):
        rows["tc_hz"].append(res["tc"])
        rows["tc_sigma_hz"].append(res.sigma["tc"])
        rows["c_eps3"].append(res["c_eps3"])
        rows["c_eps3_sigma"].append(res.sigma["c_eps3"])
        rows["peak_contrast_v"].append(procedures.peak_contrast(res))
        curves = res.extras.pop("curves")
        rep = outdir.joinpath(f"fit_peak_{k}.json")
        data_io.write_fit_report(rep, res, {"input": str(path)})
        cpath = outdir.joinpath(f"fit_peak_{k}_curves.csv")
        data_io.write_columns(cpath, curves)
        outs.extend([rep, cpath])
        summary.append(_report_fit(res, f"peak {k} ({path})"))
    series = outdir.joinpath("fit_peaks_series.csv")
    data_io.write_columns(series, rows)
    outs.append(series)
    return Outcome("\n".join(summary), outputs=outs, inputs=list(args.inputs),
                   converged=all(r.converged for r in results))


def cmd_fit_thermal(args) -> Outcome:
    scans = [data_io.read_thermal_scan(p) for p in args.inputs]
    res = calibration.fit_thermal_series(scans)
    out = _out_dir(args).joinpath(args.output or "fit_thermal.json")
    data_io.write_fit_report(
        out,
        res.series_fit,
        {"t_mc_k": res.t_mc, "widths_per_volt": res.widths, "width_sigmas": res.width_sigmas},
    )
    summary = (
        f"alpha_P3,3 = {res.alpha_p33:.5g} +/- {res.alpha_sigma:.2g} eV/V\n"
        f"T_e0       = {res.te0 / MILLIKELVIN:.4g} +/- {res.te0_sigma / MILLIKELVIN:.2g} mK"
    )
    return Outcome(summary, outputs=[out], inputs=list(args.inputs), converged=res.series_fit.converged)


# ---------------------------------------------------------------- calib


def _calib_out(args, name, payload) -> list:
    if args.no_files:
        return []
    out = _out_dir(args).joinpath(f"calib_{name}.json")
    data_io.write_json(out, payload)
    return [out]


def cmd_calib_g0(args) -> Outcome:
    g0 = calibration.bare_coupling_g0(args.alpha_s1_ev_per_v, args.fr_ghz * GHZ, args.z0r_ohm)
    outs = _calib_out(args, "g0", {"g0_hz": g0})
    return Outcome(f"g0/2pi = {g0 / MHZ:.4f} MHz", outputs=outs)


def cmd_calib_kappa(args) -> Outcome:
    fr = args.fr_ghz * GHZ
    kappa = calibration.kappa_from_q(fr, args.q)
    payload = {"kappa_hz": kappa}
    text = f"kappa/2pi = {kappa / KHZ:.4f} kHz"
    if args.q_sigma:
        sig = calibration.kappa_sigma(fr, args.q, args.q_sigma)
        payload["kappa_sigma_hz"] = sig
        text += f" +/- {sig / KHZ:.2g} kHz"
    return Outcome(text, outputs=_calib_out(args, "kappa", payload))


def cmd_calib_leverarm(args) -> Outcome:
    fx = presets.SLOPES
    slopes = calibration.SlopeSet(
        fx.m2 if args.m2 is None else args.m2,
        fx.m3 if args.m3 is None else args.m3,
        fx.m_pol if args.m_pol is None else args.m_pol,
        fx.dv_p2_s1 if args.dv_p2_s1 is None else args.dv_p2_s1,
        fx.dv_p3_s1 if args.dv_p3_s1 is None else args.dv_p3_s1,
    )
    arms = calibration.lever_arms(slopes, args.alpha_p33)
    text = "\n".join(f"{k:<13} = {v:.5g} eV/V" for k, v in arms.items())
    return Outcome(text, outputs=_calib_out(args, "leverarm", arms))


def cmd_calib_power(args) -> Outcome:
    budget = calibration.PowerBudget(args.generator_dbm, tuple(args.attenuation_db), args.z0g_ohm)
    p = calibration.power_budget(budget)
    outs = _calib_out(args, "power", {"p_in_w": p, "p_in_dbm": budget.input_dbm})
    return Outcome(f"P_in <= {budget.input_dbm:.2f} dBm = {p / PICOWATT:.4g} pW", outputs=outs)


def cmd_calib_drive(args) -> Outcome:
    eps = calibration.drive_amplitude(args.alpha_eps_ev_per_v, args.z0g_ohm, args.p_in_pw * PICOWATT)
    return Outcome(f"eps_q/h = {eps / MHZ:.4g} MHz (upper bound)", outputs=_calib_out(args, "drive", {"eps_q_hz": eps}))


def cmd_calib_photons(args) -> Outcome:
    n = float(calibration.photon_number(args.eps_r_khz * KHZ, args.kappa_khz * KHZ))
    return Outcome(f"<n> = {n:.4g} (rounded {round(n)})", outputs=_calib_out(args, "photons", {"n_photons": n}))


# ---------------------------------------------------------------- oracle / tables


def cmd_oracle_compare(args) -> Outcome:
    d = oracle.DESK
    p = oracle.LabFrameParams(
        eps0=d.eps0 if args.eps0_fr is None else args.eps0_fr,
        eps_q=d.eps_q if args.eps_q_fr is None else args.eps_q_fr,
        tc=d.tc if args.tc_fr is None else args.tc_fr,
        g0=d.g0 if args.g0_fr is None else args.g0_fr,
        eps_r=d.eps_r if args.eps_r_fr is None else args.eps_r_fr,
        fr=d.fr,
        kappa=d.kappa if args.kappa_fr is None else args.kappa_fr,
    )
    cfg = oracle.auto_config(p, n_max=args.n_max, window_periods=args.window)
    rep = oracle.oracle_iq_compare(p, cfg, window=args.window)
    out = _out_dir(args).joinpath(args.output or "oracle_compare.json")
    data_io.write_json(out, {
        "params": p.__dict__, "n_max": cfg.n_max, "dt": cfg.dt, "t_final": cfg.t_final,
        "oracle_magnitude": rep.oracle_magnitude, "effective_magnitude": rep.effective_magnitude,
        "relative_error": rep.relative_error, "regime_flags": rep.regime_flags, "drift": rep.drift,
        "trace_error": rep.trace_error, "max_top_population": rep.max_top_population,
    })
    flags = ", ".join(f"{k}={v}" for k, v in rep.regime_flags.items())
    return Outcome(
        f"oracle |alpha| = {rep.oracle_magnitude:.6g}, closed form = {rep.effective_magnitude:.6g}, "
        f"relative error = {rep.relative_error:.3%}\nregime: {flags}",
        outputs=[out],
    )


def cmd_table_couplings(args) -> Outcome:
    if args.rows:
        rows = data_io.read_coupling_rows(args.rows)
        dev = data_io.read_device(args.device).device if args.device else None
        for row in rows:
            if row["g0"] is None:
                if dev is None:
                    raise ValidationError(f"row {row['label']} has no g0_mhz and no --device was given")
                row["g0"] = dev.g0
    else:
        rows = presets.coupling_inputs()
    table = calibration.coupling_table(rows)
    refs = {r.label: r for r in presets.PRINTED_COUPLINGS}
    matched = [refs.get(r.label) for r in table]
    use_refs = matched if all(m is not None for m in matched) else None
    text = calibration.format_coupling_table(table, use_refs)
    out = _out_dir(args).joinpath(args.output or "coupling_table.csv")
    data_io.write_columns(out, {
        "tc_hz": [r.tc for r in table],
        "g0_hz": [r.g0 for r in table],
        "eps_q_hz": [r.eps_q for r in table],
        "delta_omega_hz": [r.delta_omega for r in table],
        "g_dy_hz": [r.g_dy for r in table],
        "ratio": [r.ratio for r in table],
    }, {"labels": [r.label for r in table]})
    inputs = [p for p in (args.rows, args.device) if p]
    ok = use_refs is None or all(calibration.compare_coupling_row(r, m) for r, m in zip(table, use_refs))
    if not ok:
        text += "\nreference mismatch"
    return Outcome(text, outputs=[out], inputs=inputs)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = _Parser(prog="dqdcavity", description=__doc__.split("\n\n")[0], formatter_class=fmt)
    parser.add_argument("--out-dir", default=os.environ.get(ENV_OUT_DIR, "."),
                        help=f"output directory, also read from ${ENV_OUT_DIR}")
    parser.add_argument("--threads", type=int, default=1, help="parallelism hint for independent fits")
    parser.add_argument("--replay", metavar="MANIFEST", help="re-run the command stored in a manifest")
    parser.add_argument("--version", action="version", version=__version__)
    top = parser.add_subparsers(dest="group", parser_class=_Parser)

    def group(name, help_):
        p = top.add_parser(name, help=help_, formatter_class=fmt)
        return p.add_subparsers(dest="action", required=True, parser_class=_Parser)

    def device_flags(p):
        p.add_argument("--device", help="device JSON file (overrides the built-in tuning)")
        p.add_argument("--g0-mhz", type=float, help="bare coupling g0/2pi")
        p.add_argument("--kappa-khz", type=float, help="cavity decay kappa/2pi")

    sim = group("simulate", "generate synthetic data")
    p = sim.add_parser("linecut", help="detuning line cut", formatter_class=fmt)
    p.add_argument("--channel", choices=[c.value for c in Channel], default="P3", help="drive channel")
    p.add_argument("--dataset", choices=presets.SYNTHETIC_LABELS, help="truth preset; pair-<channel> when omitted")
    p.add_argument("--tc-ghz", type=float, help="override the preset tunnel coupling")
    p.add_argument("--sigma0-v", type=float, help="noise at <n> = 1; built-in level when omitted")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--span-ueV", type=float, default=200.0, help="half span of the detuning grid")
    p.add_argument("--n-points", type=int, default=201, help="grid points")
    p.add_argument("--dc-offset-v", type=float, default=0.0, help="constant offset added to IQ")
    p.add_argument("--output", help="output file name inside the out dir")
    device_flags(p)
    p.set_defaults(func=cmd_simulate_linecut)

    p = sim.add_parser("diagram", help="gate-voltage map around the polarization line", formatter_class=fmt)
    p.add_argument("--channel", choices=[c.value for c in Channel], default="P3", help="drive channel")
    p.add_argument("--dataset", choices=presets.SYNTHETIC_LABELS, help="truth preset; pair-<channel> when omitted")
    p.add_argument("--span-mv", type=float, default=2.0, help="half span of both gate axes")
    p.add_argument("--n-points", type=int, default=81, help="points per axis")
    p.add_argument("--sigma0-v", type=float, help="noise at <n> = 1; noiseless when omitted")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--output", help="output file name inside the out dir")
    device_flags(p)
    p.set_defaults(func=cmd_simulate_diagram)

    p = sim.add_parser("spectrum", help="cavity transmission vs drive frequency", formatter_class=fmt)
    p.add_argument("--tc-ghz", type=float, default=presets.BEST_FITS["pair"].tc / GHZ, help="tunnel coupling")
    p.add_argument("--eps0-ghz", type=float, default=0.0, help="static detuning")
    p.add_argument("--eps-q-mhz", type=float, default=-137.0, help="effective detuning drive")
    p.add_argument("--eps-r-khz", type=float, default=397.0, help="effective cavity drive")
    p.add_argument("--span-khz", type=float, default=1000.0, help="frequency span around fr")
    p.add_argument("--n-points", type=int, default=2001, help="frequency points")
    p.add_argument("--output", help="output file name inside the out dir")
    device_flags(p)
    p.set_defaults(func=cmd_simulate_spectrum)

    p = sim.add_parser("thermal", help="thermally broadened transitions", formatter_class=fmt)
    p.add_argument("--alpha-ev-per-v", type=float, default=presets.ALPHA_P33, help="plunger lever arm")
    p.add_argument("--te0-mk", type=float, default=presets.TE0 / MILLIKELVIN, help="base electron temperature")
    p.add_argument("--t-mc-mk", type=float, nargs="+", default=[50, 100, 200, 300, 400, 600],
                   help="mixing-chamber temperatures, one scan each")
    p.add_argument("--span-mv", type=float, default=3.0, help="half span of the gate sweep")
    p.add_argument("--n-points", type=int, default=121, help="points per scan")
    p.add_argument("--noise-frac", type=float, default=0.02, help="noise relative to the step height")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.set_defaults(func=cmd_simulate_thermal)

    fit = group("fit", "fit measured or synthetic data")
    p = fit.add_parser("linecut", help="simultaneous S1 + P3 line-cut fit", formatter_class=fmt)
    p.add_argument("--s1", help="S1 line cut CSV")
    p.add_argument("--p3", help="P3 line cut CSV")
    p.add_argument("--starts", type=int, default=5, help="multi-start attempts")
    p.add_argument("--output", help="report file name inside the out dir")
    device_flags(p)
    p.set_defaults(func=cmd_fit_linecut)

    p = fit.add_parser("peaks", help="per-peak P3 fits with frozen beta2, beta3", formatter_class=fmt)
    p.add_argument("inputs", nargs="+", help="P3 line cut CSV files, one peak each")
    p.add_argument("--beta3", type=float, required=True, help="frozen P3 drive ratio")
    p.add_argument("--beta2", type=float, default=presets.BETA2_DEFAULT, help="frozen S1 drive ratio")
    p.add_argument("--starts", type=int, default=5, help="multi-start attempts")
    device_flags(p)
    p.set_defaults(func=cmd_fit_peaks)

    p = fit.add_parser("thermal", help="lever arm and base temperature from thermal scans", formatter_class=fmt)
    p.add_argument("inputs", nargs="+", help="thermal scan CSV files")
    p.add_argument("--output", help="report file name inside the out dir")
    p.set_defaults(func=cmd_fit_thermal)

    cal = group("calib", "calibration chain")

    def calib(name, func, help_):
        q = cal.add_parser(name, help=help_, formatter_class=fmt)
        q.add_argument("--no-files", action="store_true", help="print only")
        q.set_defaults(func=func)
        return q

    q = calib("g0", cmd_calib_g0, "bare coupling from lever arm and impedance")
    q.add_argument("--alpha-s1-ev-per-v", type=float, default=presets.DEVICE_TUNINGS["pair"].alpha_s1_eps,
                   help="S1 detuning lever arm")
    q.add_argument("--fr-ghz", type=float, default=presets.DEVICE_TUNINGS["pair"].fr / GHZ, help="resonator frequency")
    q.add_argument("--z0r-ohm", type=float, default=presets.DEVICE_TUNINGS["pair"].z0r, help="resonator impedance")
    q = calib("kappa", cmd_calib_kappa, "decay rate from loaded quality factors")
    q.add_argument("--fr-ghz", type=float, default=presets.DEVICE_TUNINGS["pair"].fr / GHZ, help="resonator frequency")
    q.add_argument("--q", type=float, nargs="+", default=list(presets.Q_LOADED), help="loaded quality factors")
    q.add_argument("--q-sigma", type=float, nargs="+", help="uncertainties of the quality factors")
    q = calib("leverarm", cmd_calib_leverarm, "detuning lever arms from line slopes")
    q.add_argument("--alpha-p33", type=float, default=presets.ALPHA_P33, help="P3 lever arm on dot 3")
    for name in ("m2", "m3", "m-pol", "dv-p2-s1", "dv-p3-s1"):
        q.add_argument(f"--{name}", type=float, help="slope or shift; built-in fixture when omitted")
    q = calib("power", cmd_calib_power, "input power from generator and attenuation chain")
    q.add_argument("--generator-dbm", type=float, default=presets.POWER_CHAINS["pair"][0], help="generator power")
    q.add_argument("--attenuation-db", type=float, nargs="*", default=list(presets.POWER_CHAINS["pair"][1]),
                   help="attenuator values along the line")
    q.add_argument("--z0g-ohm", type=float, default=presets.Z0G, help="gate line impedance")
    q = calib("drive", cmd_calib_drive, "detuning drive amplitude from input power")
    q.add_argument("--alpha-eps-ev-per-v", type=float, default=presets.DEVICE_TUNINGS["pair"].alpha_p3_eps,
                   help="detuning lever arm of the driven gate")
    q.add_argument("--z0g-ohm", type=float, default=presets.Z0G, help="gate line impedance")
    q.add_argument("--p-in-pw", type=float, default=20.0, help="power at the gate")
    q = calib("photons", cmd_calib_photons, "mean cavity photon number")
    q.add_argument("--eps-r-khz", type=float, required=True, help="effective cavity drive")
    q.add_argument("--kappa-khz", type=float, default=presets.DEVICE_TUNINGS["pair"].kappa / KHZ,
                   help="cavity decay rate")

    orc = group("oracle", "full master-equation check")
    p = orc.add_parser("compare", help="Lindblad oracle vs closed form (scaled units, fr = 1)", formatter_class=fmt)
    for name in ("eps0", "eps-q", "tc", "g0", "eps-r", "kappa"):
        p.add_argument(f"--{name}-fr", type=float, help="in units of fr; desk preset when omitted")
    p.add_argument("--n-max", type=int, default=12, help="Fock-space cutoff")
    p.add_argument("--window", type=int, default=20, help="demodulation window in drive periods")
    p.add_argument("--output", help="report file name inside the out dir")
    p.set_defaults(func=cmd_oracle_compare)

    tab = group("table", "derived tables")
    p = tab.add_parser("couplings", help="coupling table at the symmetric point", formatter_class=fmt)
    p.add_argument("--device", help="device JSON supplying g0 for rows without g0_mhz")
    p.add_argument("--rows", help="rows JSON; built-in reference rows when omitted")
    p.add_argument("--output", help="table file name inside the out dir")
    p.set_defaults(func=cmd_table_couplings)
    return parser


def _manifest(args, argv, outcome: Outcome) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "replay")}
    return {
        "command": f"{args.group} {args.action}",
        "argv": argv,
        "config": config,
        "inputs": [str(p) for p in outcome.inputs if p],
        "outputs": [str(p) for p in outcome.outputs],
        "seed": outcome.seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.replay:
        try:
            stored = data_io.read_json(args.replay)["argv"]
        except (OSError, KeyError, ValidationError) as exc:
            print(f"error: cannot replay {args.replay}: {exc}", file=sys.stderr)
            return 1
        return main(stored)
    if args.group is None:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    # pin the output directory so a replay writes to the same place
    args.out_dir = str(Path(args.out_dir).resolve())
    resolved = ["--out-dir", args.out_dir, *_strip_out_dir(argv)]
    try:
        outcome = args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (ConvergenceError, IntegratorError, TruncationError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(outcome.summary)
    manifest = Path(args.out_dir).joinpath(f"{args.group}_{args.action}.manifest.json")
    data_io.write_json(manifest, _manifest(args, resolved, outcome))
    if not outcome.converged:
        print("error: fit did not converge", file=sys.stderr)
        return 2
    return 0


def _strip_out_dir(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out-dir":
            skip = True
            continue
        if a.startswith("--out-dir="):
            continue
        out.append(a)
    return out


if __name__ == "__main__":
    sys.exit(main())
