"""Acceptance criteria: measurements plus pass/fail thresholds."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import harness, nls
from .harness import SweepConfig, fit_slope
from .spectral import Field, GridSpec, h_space_norm, hilbert, proj_neg, proj_pos, random_band_limited


@dataclass(frozen=True)
class Verdict:
    number: int
    name: str
    passed: bool
    value: float
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def default_config(**kw) -> SweepConfig:
    return SweepConfig(**kw)


# ---------------------------------------------------------------------------
# individual measurements


def nls_conservation(dt: float = 1e-3, t_final: float = 1.0) -> tuple[float, float]:
    """Relative mass and Hamiltonian drift of the split-step flow over ``t_final``."""
    g = GridSpec(4096, 80.0 * 4.0)
    st = nls.NlsState(nls.Profile("gaussian", 1.0, 4.0).sample(g))
    m0, h0 = nls.nls_invariants(st)
    worst_m = worst_h = 0.0
    for _ in range(10):
        st = nls.nls_evolve(st, st.t + t_final / 10, dt)
        m, h = nls.nls_invariants(st)
        worst_m = max(worst_m, abs(m - m0) / abs(m0))
        worst_h = max(worst_h, abs(h - h0) / abs(h0))
    return worst_m, worst_h


def amplitude_grid() -> GridSpec:
    return GridSpec(1024, 2 * np.pi * 8)


AMPLITUDES = (0.01, 0.02, 0.04, 0.08)


def oracle_equivalence(n_fields: int = 100, seed: int = 7) -> float:
    """Worst relative mismatch of Hilbert, projections and norms against dense quadrature."""
    g = GridSpec(64, 2 * np.pi * 3)
    rng = np.random.default_rng(seed)
    x = g.x
    m = np.arange(g.n_points)
    idx = np.where(m < g.n_points // 2, m, m - g.n_points)
    xi = 2 * np.pi * idx / g.length
    # dense DFT matrices
    fwd = np.exp(-1j * np.outer(xi, x)) / g.n_points
    xq = (np.arange(4 * g.n_points) + 0.5) * g.length / (4 * g.n_points)
    evalq = np.exp(1j * np.outer(xq, xi))
    worst = 0.0
    for _ in range(n_fields):
        f = random_band_limited(g, (-g.k_nyquist * 0.9, g.k_nyquist * 0.9), rng)
        c = fwd @ f.physical
        sg = np.sign(xi)
        h_ref = np.exp(1j * np.outer(x, xi)) @ (-1j * sg * c)
        pn_ref = np.exp(1j * np.outer(x, xi)) @ (np.where(xi < 0, c, 0) + np.where(xi == 0, 0.5 * c, 0))
        pp_ref = np.exp(1j * np.outer(x, xi)) @ (np.where(xi > 0, c, 0) + np.where(xi == 0, 0.5 * c, 0))
        vals = evalq @ c
        l2_ref = math.sqrt(np.sum(np.abs(vals) ** 2) * g.length / xq.size)
        half_ref = math.sqrt(g.length * np.sum(np.abs(xi) * np.abs(c) ** 2))
        scale = np.max(np.abs(f.physical))
        errs = [
            np.max(np.abs(hilbert(f).physical - h_ref)) / scale,
            np.max(np.abs(proj_neg(f).physical - pn_ref)) / scale,
            np.max(np.abs(proj_pos(f).physical - pp_ref)) / scale,
            abs(f.l2() - l2_ref) / l2_ref,
            abs(h_space_norm(Field.zeros(g), f) - half_ref) / half_ref,
        ]
        worst = max(worst, max(errs))
    return float(worst)


# ---------------------------------------------------------------------------
# criteria


def _timed(fn: Callable[[], Verdict]) -> Verdict:
    t0 = time.perf_counter()
    v = fn()
    return replace(v, seconds=time.perf_counter() - t0)


def evaluate(cfg: Optional[SweepConfig] = None, quick: bool = False, log: Optional[Callable[[str], None]] = None) -> list[Verdict]:
    """Run every criterion; ``quick`` skips the long packet evolutions (9, 10, 12)."""
    cfg = cfg or default_config()
    out: list[Verdict] = []
    runs: list = []

    def emit(v: Verdict):
        out.append(v)
        if log is not None:
            log(v.line())

    def c2():
        drift, dt = harness.hamiltonian_drift(0.1, replace(cfg, wave_points=cfg.wave_points or 16384))
        return Verdict(2, "hamiltonian conservation", drift <= 1e-6, drift, f"max rel drift {drift:.2e} (dt {dt:.3g}) <= 1e-6")

    def c3():
        dm, dh = nls_conservation()
        ok = dm <= 1e-10 and dh <= 1e-8
        return Verdict(3, "NLS conservation", ok, max(dm, dh), f"mass drift {dm:.2e} <= 1e-10, hamiltonian drift {dh:.2e} <= 1e-8")

    def c4():
        pts = harness.quadratic_cancellation_study(AMPLITUDES, amplitude_grid())
        f = fit_slope(*zip(*pts))
        return Verdict(4, "quadratic normal form cancellation", abs(f.slope - 3.0) <= 0.2, f.slope, f"slope {f.slope:.3f} in 3.0 +- 0.2")

    def c5():
        pts = harness.inverse_study(AMPLITUDES, amplitude_grid())
        f = fit_slope(*zip(*pts))
        return Verdict(5, "cubic inverse property", abs(f.slope - 4.0) <= 0.3, f.slope, f"slope {f.slope:.3f} in 4.0 +- 0.3")

    def c6():
        ratios = [harness.residual_case(e, cfg, t_slow=0.0).closeness_H / e**1.5 for e in harness.DEFAULT_EPS]
        spread = max(ratios) / min(ratios)
        return Verdict(6, "packet closeness", spread <= 3.0, spread, f"closeness/eps^1.5 spread {spread:.3f} <= 3")

    def c7():
        rows = harness.residual_study(harness.RESIDUAL_EPS, cfg)
        f = fit_slope([r.eps for r in rows], [r.g_hN for r in rows])
        ok = f.slope >= 3.2 and f.r_squared >= 0.98
        return Verdict(7, "residual scaling", ok, f.slope, f"H^2 slope {f.slope:.3f} >= 3.2, r2 {f.r_squared:.4f} >= 0.98")

    def c8():
        prof = nls.Profile("sobolev_tail", 1.0, 4.0, s=3.0, seed=cfg.profile.seed)
        kw = dict(c=0.25, slow_length=2 * np.pi * 16, slow_points=65536)
        sm = harness.truncation_study(harness.TRUNCATION_EPS, prof, window="smooth", **kw)
        sh = harness.truncation_study(harness.TRUNCATION_EPS, prof, window="sharp", **kw)
        fs = fit_slope([r.eps for r in sm], [r.f_resid_l2 for r in sm])
        fh = fit_slope([r.eps for r in sh], [r.f_resid_l2 for r in sh])
        return Verdict(
            8, "truncation residual", fs.slope >= 3.7, fs.slope,
            f"smooth-window slope {fs.slope:.3f} >= 3.7 (sharp cutoff {fh.slope:.3f})",
        )

    def c9():
        rs, fits = harness.sweep(cfg)
        runs.extend(rs)
        f = fits["err_H"]
        cs = [r.max("rel_err") / r.eps for r in rs]
        spread = max(cs) / min(cs)
        ok = f.slope >= 1.3 and f.r_squared >= 0.95 and spread <= 2.0
        return Verdict(
            9, "main approximation law", ok, f.slope,
            f"err_H slope {f.slope:.3f} >= 1.3, r2 {f.r_squared:.4f} >= 0.95, rel_err/eps spread {spread:.3f} <= 2",
        )

    def c10():
        f = harness.fit_runs(runs)["err_H1_diff"]
        g = harness.fit_runs(runs)["err_H1_miy"]
        h = harness.fit_runs(runs)["err_H1_iy"]
        return Verdict(
            10, "differentiated closeness", f.slope >= 1.3, f.slope,
            f"H^1 slope {f.slope:.3f} >= 1.3 (variants: -iY {g.slope:.3f}, +iY {h.slope:.3f})",
        )

    def c11():
        fine = replace(cfg, wave_kmax=max(cfg.wave_kmax, 16.0))
        worst = max(harness.linearization_check(e, fine) for e in (0.1, 0.16))
        return Verdict(11, "linearized translation solution", worst <= 1e-7, worst, f"relative mismatch {worst:.2e} <= 1e-7")

    def c12():
        eps = 0.1
        base = harness.run_case(eps, cfg).max("err_H")
        pert = harness.stability_probe(eps, 0.5, cfg).max("err_H")
        ratio = pert / base
        return Verdict(12, "stability probe", ratio <= 3.0, ratio, f"perturbed/unperturbed max err_H {ratio:.3f} <= 3")

    def c13():
        worst = oracle_equivalence()
        return Verdict(13, "oracle equivalences", worst <= 1e-10, worst, f"worst relative mismatch {worst:.2e} <= 1e-10")

    def c1():
        if not runs:
            short = replace(cfg, T_slow=min(cfg.T_slow, 0.1), n_checkpoints=10)
            runs_local = [harness.run_case(harness.DEFAULT_EPS[0], short)]
        else:
            runs_local = runs
        leak = max(r.max("pos_freq_leak") for r in runs_local)
        return Verdict(1, "holomorphy preservation", leak <= 1e-8, leak, f"max positive-frequency mass {leak:.2e} <= 1e-8 over {len(runs_local)} runs")

    order = [c2, c3, c4, c5, c6, c7, c8, c11, c13]
    if not quick:
        order += [c9, c10, c12]
    for fn in order:
        emit(_timed(fn))
    emit(_timed(c1))
    return sorted(out, key=lambda v: v.number)
