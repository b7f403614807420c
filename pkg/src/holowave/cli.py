"""Command line entry point: ``holowave <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import acceptance, config, harness, nls, report
from .harness import SweepConfig, fit_slope
from .normalform import build_packet, invert_normal_form
from .spectral import Field, GridSpec, h_space_norm, read_snapshot, write_snapshot
from .waterwave import LawsonRK4, WWState, control_norms, derive_diff_state, e0_energy, hamiltonian

log = logging.getLogger("holowave")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage problems raise instead of exiting with argparse's status 2."""

    def error(self, message):
        raise UsageError(f"{self.format_help()}\n{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# shared flag groups


def _eps_list(text: str) -> tuple:
    try:
        vals = tuple(float(s) for s in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty eps list")
    return vals


def _add_profile(p, kind="gaussian"):
    p.add_argument("--profile", default=kind, choices=("gaussian", "sech", "sobolev_tail"), help="initial envelope shape")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--width", type=float, default=4.0)
    p.add_argument("--s", type=float, default=3.0, help="regularity index of sobolev_tail data")
    p.add_argument("--profile-seed", type=int, default=None, help="phase seed of sobolev_tail data (default: --seed)")


def _profile(args) -> nls.Profile:
    seed = args.profile_seed if args.profile_seed is not None else _seed(args)
    return nls.Profile(args.profile, args.amplitude, args.width, args.s, seed)


def _seed(args) -> int:
    return config.resolve_seed(args.seed)


def _sweep_cfg(args) -> tuple[SweepConfig, Optional[config.RunConfig]]:
    """Config file if given, else defaults; explicit flags win over the file."""
    rc = config.load(args.config) if getattr(args, "config", None) else None
    cfg = rc.sweep if rc else SweepConfig(seed=config.resolve_seed(SweepConfig.seed))
    if getattr(args, "jobs", None):
        cfg = replace(cfg, jobs=args.jobs)
    elif cfg.jobs <= 1:
        cfg = replace(cfg, jobs=harness.default_jobs())
    return cfg, rc


def _out_dir(args, rc: Optional[config.RunConfig], default: str) -> Path:
    d = getattr(args, "out_dir", None) or (rc.out_dir if rc else None) or default
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands


def cmd_nls_run(args) -> int:
    prof = _profile(args)
    length = args.length or 80.0 * prof.width
    grid = GridSpec(args.n, length)
    st = nls.NlsState(prof.sample(grid), 0.0, args.lam)
    m0, h0 = nls.nls_invariants(st)
    st = nls.nls_evolve(st, args.t_final, args.dt)
    m1, h1 = nls.nls_invariants(st)
    write_snapshot(args.out, [st.u], st.t)
    print(f"t={st.t:g} mass drift {abs(m1 - m0) / abs(m0):.3e} hamiltonian drift {abs(h1 - h0) / max(abs(h0), 1e-300):.3e}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_trunc_study(args) -> int:
    prof = _profile(args)
    rows = harness.truncation_study(args.eps, prof, c=args.c, slow_length=args.length, slow_points=args.n, lam=args.lam, window=args.window)
    out = Path(args.out)
    report.write_table(out, harness.TruncationRow.COLUMNS, [(r.eps, r.f_resid_l2, r.g_resid_l2) for r in rows])
    eps = [r.eps for r in rows]
    series = {"f_resid_l2": [r.f_resid_l2 for r in rows], "g_resid_l2": [r.g_resid_l2 for r in rows]}
    fits = {k: fit_slope(eps, v) for k, v in series.items()} if len(rows) >= 4 else {}
    report.save_figure(out.with_suffix(".png"), report.loglog_figure(eps, series, fits, title=f"truncation residual ({args.window} window)"))
    for k, f in fits.items():
        print(f"{k}: slope {f.slope:.3f} r2 {f.r_squared:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_packet_build(args) -> int:
    prof = _profile(args)
    cfg = SweepConfig(profile=prof, c_trunc=args.c, lam=args.lam, wave_kmax=args.kmax, wave_points=args.n)
    grids = cfg.grids(args.eps)
    u0 = prof.sample(grids.slow)
    tau = args.eps**2 * args.t
    u = nls.nls_evolve(nls.NlsState(u0, 0.0, args.lam), tau, cfg.nls_dt).u if args.t else u0
    y = nls.packet(grids, nls.truncate(u, args.eps, args.c), args.t)
    st = invert_normal_form(build_packet(y, args.c), args.t)
    write_snapshot(args.out, [st.w_field, st.q_field], args.t)
    print(f"eps={args.eps:g} wave grid n={grids.wave.n_points} L={grids.wave.length:.6g}; wrote {args.out}")
    if args.envelope_out:
        write_snapshot(args.envelope_out, [u], tau)
        print(f"wrote {args.envelope_out}")
    return EXIT_OK


def _reference_grids(env_path: str, eps: float, wave: GridSpec) -> tuple[nls.PacketGrids, Field, float]:
    snap = read_snapshot(env_path)
    slow = snap.grid
    m = int(round(wave.length / (2 * math.pi)))
    if not math.isclose(wave.length, 2 * math.pi * m, rel_tol=1e-12):
        raise ValueError("wave grid length is not a multiple of 2 pi")
    if not math.isclose(slow.length, eps * wave.length, rel_tol=1e-9):
        raise ValueError(f"envelope grid length {slow.length:g} does not match eps * L = {eps * wave.length:g}")
    return nls.PacketGrids(eps, slow, wave, m), snap.fields[0], snap.t


def cmd_ww_run(args) -> int:
    snap = read_snapshot(args.init)
    if len(snap.fields) < 2:
        raise ValueError(f"{args.init}: expected W and Q fields")
    g = snap.grid
    w0, q0 = snap.fields[0], snap.fields[1]
    # the snapshot stores the full W; the mean level is tracked separately
    mean = complex(w0.spectral[0])
    state = WWState(w0.with_zero_mean(), q0.with_zero_mean(), snap.t, mean)

    grids = nls_state = None
    if args.envelope:
        if args.eps is None:
            raise UsageError("--envelope needs --eps")
        grids, u, tau = _reference_grids(args.envelope, args.eps, g)
        nls_state = nls.NlsState(u, tau, args.lam)

    dt_max = args.dt or 0.25 / math.sqrt(g.k_nyquist)
    n_steps = max(1, math.ceil(args.t_final / dt_max - 1e-9))
    dt = args.t_final / n_steps
    integ = LawsonRK4(g, dt)
    e_init = hamiltonian(state)
    out = _out_dir(args, None, "ww-run")
    cols = ("t", "E", "E0", "A", "B", "err_H", "pos_freq_leak")
    rows = []

    def record(st: WWState):
        nonlocal nls_state
        d = derive_diff_state(st)
        a, b = control_norms(st)
        err = ""
        if nls_state is not None:
            nls_state = nls.nls_evolve(nls_state, args.eps**2 * st.t, args.nls_dt)
            yf = Field(g, nls.envelope_coeffs(grids, nls_state.u.spectral, st.t))
            err = h_space_norm(st.w_field - yf, st.q_field - yf)
        rows.append((st.t, hamiltonian(st), e0_energy(d.bw, d.r), a, b, err, st.positive_frequency_leak()))

    record(state)
    w, q, m = state.w_field.spectral, state.q_field.spectral, state.w_mean
    for i in range(1, n_steps + 1):
        w, q, m = integ.step_with_mean(w, q, m)
        if i % args.checkpoint_every == 0 or i == n_steps:
            record(WWState(Field(g, w), Field(g, q), snap.t + i * dt, m))
    final = WWState(Field(g, w), Field(g, q), snap.t + n_steps * dt, m)
    wc = final.w_field.spectral.copy()
    wc[0] = m
    full_w = Field(g, wc)
    write_snapshot(out / "final.hlwv", [full_w, final.q_field], final.t)
    report.write_table(out / "metrics.csv", cols, rows)
    t = [r[0] for r in rows]
    series = {
        "E drift": [abs(r[1] - e_init) / abs(e_init) if e_init else 0.0 for r in rows],
        "E0": [r[2] for r in rows],
        "A": [r[3] for r in rows],
        "B": [r[4] for r in rows],
    }
    if grids is not None:
        series["err_H"] = [r[5] for r in rows]
    report.save_figure(out / "metrics.png", report.history_figure(t, series, title="water-wave run"))
    print(f"{n_steps} steps of dt={dt:.4g}; {len(rows)} checkpoints; wrote {out}")
    return EXIT_OK


def cmd_residual_sweep(args) -> int:
    cfg, _ = _sweep_cfg(args)
    if args.profile:
        cfg = replace(cfg, profile=replace(cfg.profile, kind=args.profile))
    rows = harness.residual_study(args.eps, cfg)
    out = Path(args.out)
    report.write_table(out, harness.ResidualRow.COLUMNS, [tuple(getattr(r, c) for c in harness.ResidualRow.COLUMNS) for r in rows])
    eps = [r.eps for r in rows]
    series = {"H^N residual": [r.g_hN for r in rows], "closeness_H": [r.closeness_H for r in rows]}
    fits = {k: fit_slope(eps, v) for k, v in series.items()} if len(rows) >= 4 else {}
    report.save_figure(out.with_suffix(".png"), report.loglog_figure(eps, series, fits, title="packet residuals"))
    for k, f in fits.items():
        print(f"{k}: slope {f.slope:.3f} r2 {f.r_squared:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def sweep_verdict(runs, fits) -> list[tuple[str, bool, str]]:
    """Acceptance checks on a finished sweep: (metric, passed, detail)."""
    f, d = fits["err_H"], fits["err_H1_diff"]
    cs = [r.max("rel_err") / r.eps for r in runs]
    spread = max(cs) / min(cs)
    leak = max(r.max("pos_freq_leak") for r in runs)
    return [
        ("err_H", f.slope >= 1.3 and f.r_squared >= 0.95, f"slope {f.slope:.3f} >= 1.3, r2 {f.r_squared:.4f} >= 0.95"),
        ("rel_err", spread <= 2.0, f"rel_err/eps spread {spread:.3f} <= 2"),
        ("err_H1_diff", d.slope >= 1.3, f"slope {d.slope:.3f} >= 1.3"),
        ("pos_freq_leak", leak <= harness.LEAK_LIMIT, f"max {leak:.2e} <= {harness.LEAK_LIMIT:g}"),
    ]


def _verdict_text(checks) -> str:
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in checks]
    overall = all(ok for _, ok, _ in checks)
    lines.append("VERDICT: " + ("PASS" if overall else "FAIL"))
    return "\n".join(lines) + "\n"


def _report_failures(checks) -> int:
    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        print(f"acceptance failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, rc = _sweep_cfg(args)
    out = _out_dir(args, rc, "sweep-out")
    if rc is not None and rc.source:
        report.write_text(out / "config.cfg", Path(rc.source).read_text())
    report.write_text(out / "resolved.cfg", config.dump(cfg))
    runs, fits = harness.sweep(cfg)
    for r in runs:
        report.write_table(out / f"case_eps{r.eps:g}.csv", harness.RunMetrics.COLUMNS, r.rows())
    report.write_json(out / "summary.json", {k: {"slope": f.slope, "r2": f.r_squared, "points": [list(p) for p in f.points]} for k, f in fits.items()})
    checks = sweep_verdict(runs, fits)
    text = _verdict_text(checks)
    report.write_text(out / "verdict.txt", text)
    report.save_figure(out / "sweep.png", report.sweep_figure(runs, fits))
    sys.stdout.write(text)
    return _report_failures(checks)


def cmd_stability(args) -> int:
    cfg, rc = _sweep_cfg(args)
    out = _out_dir(args, rc, "stability-out")
    base = harness.run_case(args.eps, cfg)
    pert = harness.stability_probe(args.eps, args.delta, cfg)
    ratio = pert.max("err_H") / base.max("err_H")
    rows = [(a, b, c) for a, b, c in zip(base.t, base.err_H, pert.err_H)]
    report.write_table(out / "stability.csv", ("t", "err_H", "err_H_perturbed"), rows)
    report.write_json(out / "stability.json", {"eps": args.eps, "delta": args.delta, "seed": cfg.seed, "max_err_H": base.max("err_H"), "max_err_H_perturbed": pert.max("err_H"), "ratio": ratio})
    checks = [("err_H_ratio", ratio <= args.factor, f"perturbed/unperturbed {ratio:.3f} <= {args.factor:g}")]
    text = _verdict_text(checks)
    report.write_text(out / "verdict.txt", text)
    report.save_figure(out / "stability.png", report.history_figure(base.t, {"err_H": base.err_H, "err_H perturbed": pert.err_H}, title=f"eps={args.eps:g}"))
    sys.stdout.write(text)
    return _report_failures(checks)


def cmd_check(args) -> int:
    cfg, _ = _sweep_cfg(args)
    verdicts = acceptance.evaluate(cfg, quick=args.quick, log=print)
    if args.out:
        report.write_text(args.out, "".join(v.line() + "\n" for v in verdicts))
    failed = [f"{v.number} ({v.name})" for v in verdicts if not v.passed]
    if failed:
        print(f"acceptance failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    print(f"all {len(verdicts)} criteria passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="holowave", description="Wave-packet experiments for deep-water gravity waves.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("nls-run", help="evolve the cubic envelope equation")
    _add_profile(s)
    s.add_argument("--lambda", dest="lam", type=float, default=nls.LAMBDA_WW)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-final", type=float, default=1.0)
    s.add_argument("--n", type=int, default=4096, help="slow grid points")
    s.add_argument("--length", type=float, default=None, help="slow period (default 80 * width)")
    s.add_argument("--out", required=True, help="snapshot path")
    s.add_argument("--seed", type=int, default=SweepConfig.seed)
    s.set_defaults(func=cmd_nls_run)

    s = sub.add_parser("trunc-study", help="truncation residual rates")
    _add_profile(s, "sobolev_tail")
    s.add_argument("--eps", type=_eps_list, default=harness.TRUNCATION_EPS)
    s.add_argument("--c", type=float, default=0.25)
    s.add_argument("--lambda", dest="lam", type=float, default=nls.LAMBDA_WW)
    s.add_argument("--window", choices=nls.WINDOWS, default="sharp")
    s.add_argument("--n", type=int, default=65536, help="slow grid points")
    s.add_argument("--length", type=float, default=None)
    s.add_argument("--out", required=True, help="CSV path")
    s.add_argument("--seed", type=int, default=SweepConfig.seed)
    s.set_defaults(func=cmd_trunc_study)

    s = sub.add_parser("packet-build", help="water-wave initial data from an envelope")
    _add_profile(s)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--c", type=float, default=0.25)
    s.add_argument("--t", type=float, default=0.0, help="wave time")
    s.add_argument("--lambda", dest="lam", type=float, default=nls.LAMBDA_WW)
    s.add_argument("--kmax", type=float, default=12.0, help="wave grid must resolve |xi| <= kmax")
    s.add_argument("--n", type=int, default=None, help="wave grid points (overrides --kmax)")
    s.add_argument("--out", required=True, help="snapshot path for (W, Q)")
    s.add_argument("--envelope-out", default=None, help="snapshot path for the envelope at slow time eps^2 t")
    s.add_argument("--seed", type=int, default=SweepConfig.seed)
    s.set_defaults(func=cmd_packet_build)

    s = sub.add_parser("ww-run", help="evolve water-wave data from a snapshot")
    s.add_argument("--init", required=True, help="snapshot with W and Q")
    s.add_argument("--t-final", type=float, required=True, help="wave time to advance")
    s.add_argument("--dt", type=float, default=None, help="max step (default 0.25 / sqrt(k_nyquist))")
    s.add_argument("--checkpoint-every", type=int, default=100, help="steps between CSV rows")
    s.add_argument("--out-dir", default=None)
    s.add_argument("--envelope", default=None, help="envelope snapshot for the err_H column")
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--lambda", dest="lam", type=float, default=nls.LAMBDA_WW)
    s.add_argument("--nls-dt", type=float, default=1e-3)
    s.set_defaults(func=cmd_ww_run)

    s = sub.add_parser("residual-sweep", help="packet residuals over eps")
    s.add_argument("--eps", type=_eps_list, default=harness.RESIDUAL_EPS)
    s.add_argument("--config", default=None)
    s.add_argument("--profile", choices=("gaussian", "sech", "sobolev_tail"), default=None)
    s.add_argument("--out", required=True, help="CSV path")
    s.add_argument("--jobs", type=int, default=None)
    s.set_defaults(func=cmd_residual_sweep)

    s = sub.add_parser("sweep", help="approximation-error sweep over eps")
    s.add_argument("--config", required=True, help="key = value config file")
    s.add_argument("--out-dir", default=None, help="overrides out_dir from the config")
    s.add_argument("--jobs", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("stability", help="perturbed versus unperturbed packet run")
    s.add_argument("--config", default=None)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--delta", type=float, default=0.5)
    s.add_argument("--factor", type=float, default=3.0, help="allowed error growth")
    s.add_argument("--out-dir", default=None)
    s.add_argument("--jobs", type=int, default=None)
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("check", help="acceptance suite")
    s.add_argument("--quick", action="store_true", help="skip the long packet evolutions")
    s.add_argument("--config", default=None)
    s.add_argument("--out", default=None, help="write the verdict lines here")
    s.add_argument("--jobs", type=int, default=None)
    s.set_defaults(func=cmd_check)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"holowave: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (config.ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"holowave: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
