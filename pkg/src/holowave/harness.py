"""Convergence experiments: packet runs, epsilon sweeps and slope fits."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import nls
from .normalform import (
    TransformedState,
    approx_residual,
    band_fraction,
    build_packet,
    forward_cubic,
    forward_quadratic,
    invert_normal_form,
    packet_snapshot,
    packet_snapshot_fd,
    tilde_residual,
)
from .spectral import Field, GridSpec, h_space_norm, hk_norm, random_band_limited
from .waterwave import (
    LawsonRK4,
    WWState,
    control_norms,
    derive_diff_state,
    diff_time_derivative,
    hamiltonian,
    linearized_rhs,
    ww_rhs,
)

log = logging.getLogger(__name__)

DEFAULT_EPS = (0.16, 0.13, 0.10, 0.08)
RESIDUAL_EPS = (0.3, 0.25, 0.2, 0.15)
TRUNCATION_EPS = (0.02, 0.01, 0.005, 0.0025)
LEAK_LIMIT = 1e-8


@dataclass(frozen=True)
class SweepConfig:
    """Experiment parameters.

    Resolution policy: the slow grid has ``slow_points`` points over
    ``slow_length_factor * profile.width``; the wave grid length is the
    nearest multiple of ``2 pi`` to ``slow_length / eps`` and its size the
    smallest power of two whose Nyquist wavenumber reaches ``wave_kmax``.
    The wave step is ``dt_factor / sqrt(k_nyquist)`` shortened to land on
    checkpoints.
    """

    eps_values: tuple = DEFAULT_EPS
    T_slow: float = 0.5
    profile: nls.Profile = field(default_factory=nls.Profile)
    c_trunc: float = 0.25
    lam: float = nls.LAMBDA_WW
    slow_length_factor: float = 80.0
    slow_points: int = 4096
    wave_kmax: float = 12.0
    wave_points: Optional[int] = None
    dt_factor: float = 0.25
    nls_dt: float = 1e-3
    n_checkpoints: int = 50
    N_sobolev: int = 2
    seed: int = 20240611
    jobs: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        if any(not 0 < e < 0.5 for e in eps):
            raise ValueError("eps values must lie in (0, 0.5)")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("eps values must be strictly decreasing")
        object.__setattr__(self, "eps_values", eps)
        if self.n_checkpoints < 1:
            raise ValueError("n_checkpoints must be positive")
        if self.T_slow <= 0:
            raise ValueError("T_slow must be positive")

    @property
    def slow_length(self) -> float:
        return self.slow_length_factor * self.profile.width

    def grids(self, eps: float) -> nls.PacketGrids:
        return nls.PacketGrids.build(eps, self.slow_length, self.slow_points, self.wave_kmax, self.wave_points)


@dataclass
class RunMetrics:
    eps: float
    t: np.ndarray
    err_H: np.ndarray
    err_H1_diff: np.ndarray
    err_H1_iy: np.ndarray
    err_H1_miy: np.ndarray
    rel_err: np.ndarray
    E_drift: np.ndarray
    A_ctrl: np.ndarray
    B_ctrl: np.ndarray
    pos_freq_leak: np.ndarray
    n_points: int = 0
    dt: float = 0.0

    COLUMNS = ("t", "err_H", "err_H1_diff", "rel_err", "E_drift", "A", "B", "leak")

    def rows(self):
        for i in range(len(self.t)):
            yield (
                self.t[i],
                self.err_H[i],
                self.err_H1_diff[i],
                self.rel_err[i],
                self.E_drift[i],
                self.A_ctrl[i],
                self.B_ctrl[i],
                self.pos_freq_leak[i],
            )

    def max(self, name: str) -> float:
        return float(np.max(getattr(self, name)))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    points: tuple

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r_squared, "points": [list(p) for p in self.points]}


def fit_slope(xs: Sequence[float], ys: Sequence[float], min_points: int = 4) -> FitResult:
    """Least-squares line through ``(log x, log y)``; ``points`` keeps the raw pairs."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < min_points:
        raise ValueError(f"need at least {min_points} points for a slope fit, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("slope fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = slope * lx + icpt
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    return FitResult(float(slope), float(icpt), r2, tuple(zip(xs.tolist(), ys.tolist())))


# ---------------------------------------------------------------------------
# single packet run


def _initial_state(grids: nls.PacketGrids, u0: Field, c: float) -> WWState:
    y0 = nls.packet(grids, nls.truncate(u0, grids.eps, c), 0.0)
    return invert_normal_form(build_packet(y0, c), 0.0)


def random_perturbation(grid: GridSpec, size: float, rng: np.random.Generator, kmax: float = 8.0) -> tuple[Field, Field]:
    """Random holomorphic mean-free pair with ``|xi| <= kmax`` scaled to energy norm ``size``."""
    w = random_band_limited(grid, (-kmax, -1e-12), rng).with_zero_mean()
    q = random_band_limited(grid, (-kmax, -1e-12), rng).with_zero_mean()
    nrm = h_space_norm(w, q)
    if nrm == 0 or size == 0:
        return Field.zeros(grid), Field.zeros(grid)
    return w * (size / nrm), q * (size / nrm)


def run_case(
    eps: float,
    cfg: SweepConfig,
    perturbation: Optional[tuple[Field, Field]] = None,
    progress: Optional[Callable[[float], None]] = None,
) -> RunMetrics:
    """Evolve the packet initial data to ``T_slow / eps^2`` and record error metrics."""
    grids = cfg.grids(eps)
    g = grids.wave
    c = cfg.c_trunc
    u = cfg.profile.sample(grids.slow)
    state0 = _initial_state(grids, u, c)
    if perturbation is not None:
        state0 = WWState(state0.w_field + perturbation[0], state0.q_field + perturbation[1], 0.0)

    t_final = cfg.T_slow / eps**2
    nck = cfg.n_checkpoints
    t_ck = t_final / nck
    dt_max = cfg.dt_factor / math.sqrt(g.k_nyquist)
    sub = max(1, math.ceil(t_ck / dt_max - 1e-9))
    dt = t_ck / sub
    integ = LawsonRK4(g, dt)
    log.info("run eps=%g n=%d L=%.1f dt=%.4g steps=%d", eps, g.n_points, g.length, dt, sub * nck)

    e0 = hamiltonian(state0)
    nls_state = nls.NlsState(u, 0.0, cfg.lam)
    ik = 1j * g.k
    cols = {name: [] for name in ("t", "eh", "ed", "eiy", "emiy", "rel", "ed_E", "a", "b", "leak")}

    w, q, mean = state0.w_field.spectral, state0.q_field.spectral, 0j
    for i in range(nck + 1):
        t = i * t_ck
        if i > 0:
            for _ in range(sub):
                w, q, mean = integ.step_with_mean(w, q, mean)
            nls_state = nls.nls_evolve(nls_state, eps**2 * t, cfg.nls_dt)
        st = WWState(Field(g, w), Field(g, q), t, mean)
        leak = st.positive_frequency_leak()
        if leak > LEAK_LIMIT:
            raise RuntimeError(f"positive-frequency leak {leak:.2e} at t={t:.3g}")
        y = nls.envelope_coeffs(grids, nls_state.u.spectral, t)
        yt = nls.envelope_coeffs(grids, nls.truncate(nls_state.u, eps, c).spectral, t)
        yf = Field(g, y)
        err = h_space_norm(st.w_field - yf, st.q_field - yf)
        ref = h_space_norm(yf, yf)
        d = derive_diff_state(st)
        ya = Field(g, ik * yt)
        iy = Field(g, 1j * y)
        a_ctrl, b_ctrl = control_norms(st)
        cols["t"].append(t)
        cols["eh"].append(err)
        cols["ed"].append(hk_norm(d.bw - ya, d.r - ya, 1))
        cols["eiy"].append(hk_norm(d.bw - iy, d.r - iy, 1))
        cols["emiy"].append(hk_norm(d.bw + iy, d.r + iy, 1))
        cols["rel"].append(err / ref if ref > 0 else 0.0)
        cols["ed_E"].append(abs(hamiltonian(st) - e0) / abs(e0) if e0 != 0 else 0.0)
        cols["a"].append(a_ctrl)
        cols["b"].append(b_ctrl)
        cols["leak"].append(leak)
        if progress is not None:
            progress(t / t_final)

    arr = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
    return RunMetrics(
        eps=eps,
        t=arr["t"],
        err_H=arr["eh"],
        err_H1_diff=arr["ed"],
        err_H1_iy=arr["eiy"],
        err_H1_miy=arr["emiy"],
        rel_err=arr["rel"],
        E_drift=arr["ed_E"],
        A_ctrl=arr["a"],
        B_ctrl=arr["b"],
        pos_freq_leak=arr["leak"],
        n_points=g.n_points,
        dt=dt,
    )


def _run_case_star(args):
    eps, cfg = args
    return run_case(eps, cfg)


def run_cases(cfg: SweepConfig) -> list[RunMetrics]:
    """All cases of ``cfg``, in a process pool when ``cfg.jobs > 1``; sorted by eps."""
    tasks = [(e, cfg) for e in cfg.eps_values]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as ex:
            out = list(ex.map(_run_case_star, tasks))
    else:
        out = [_run_case_star(a) for a in tasks]
    return sorted(out, key=lambda m: m.eps)


SWEEP_METRICS = ("err_H", "err_H1_diff", "err_H1_iy", "err_H1_miy", "rel_err")


def fit_runs(runs: Sequence[RunMetrics]) -> dict[str, FitResult]:
    eps = [r.eps for r in runs]
    return {m: fit_slope(eps, [r.max(m) for r in runs]) for m in SWEEP_METRICS}


def sweep(cfg: SweepConfig) -> tuple[list[RunMetrics], dict[str, FitResult]]:
    if len(cfg.eps_values) < 4:
        raise ValueError("a sweep needs at least 4 eps values")
    runs = run_cases(cfg)
    return runs, fit_runs(runs)


def stability_probe(eps: float, delta: float, cfg: SweepConfig, size: Optional[float] = None) -> RunMetrics:
    """Rerun with initial data perturbed by a random pair of energy norm ``eps^(1+delta)``."""
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    grid = cfg.grids(eps).wave
    rng = np.random.default_rng(cfg.seed)
    amp = eps ** (1 + delta) if size is None else size
    return run_case(eps, cfg, random_perturbation(grid, amp, rng))


# ---------------------------------------------------------------------------
# residual and transform studies


@dataclass(frozen=True)
class ResidualRow:
    eps: float
    tilde_g_l2: float
    tilde_k_l2: float
    g_l2: float
    k_l2: float
    g_hN: float
    closeness_H: float
    closeness_tilde: float
    tilde_fd_l2: float
    g_hN_fd: float
    band_fraction: float

    COLUMNS = ("eps", "tilde_g_l2", "tilde_k_l2", "g_l2", "k_l2", "closeness_H")


def residual_case(eps: float, cfg: SweepConfig, t_slow: Optional[float] = None) -> ResidualRow:
    """Residuals and closeness of the packet at slow time ``t_slow`` (default ``cfg.T_slow``)."""
    grids = cfg.grids(eps)
    tau = cfg.T_slow if t_slow is None else t_slow
    u0 = cfg.profile.sample(grids.slow)
    u = nls.nls_evolve(nls.NlsState(u0, 0.0, cfg.lam), tau, cfg.nls_dt).u
    t = tau / eps**2
    sn = packet_snapshot(grids, u, t, cfg.c_trunc, cfg.lam)
    sf = packet_snapshot_fd(grids, u, t, cfg.c_trunc, lam=cfg.lam)
    tr = tilde_residual(sn.tilde, sn.tilde_t)
    trf = tilde_residual(sf.tilde, sf.tilde_t)
    ar, hn = approx_residual(sn.full, sn.full_t, cfg.N_sobolev)
    _, hn_fd = approx_residual(sf.full, sf.full_t, cfg.N_sobolev)
    y = sn.y
    close = h_space_norm(sn.full.w_field - y, sn.full.q_field - y)
    close_t = h_space_norm(sn.tilde.wt - y, sn.tilde.qt - y)
    return ResidualRow(
        eps=eps,
        tilde_g_l2=tr.g_l2,
        tilde_k_l2=tr.k_l2,
        g_l2=ar.g_l2,
        k_l2=ar.k_l2,
        g_hN=hn,
        closeness_H=close,
        closeness_tilde=close_t,
        tilde_fd_l2=trf.total_l2,
        g_hN_fd=hn_fd,
        band_fraction=band_fraction(tr.g + tr.k, cfg.c_trunc),
    )


def residual_study(eps_values: Sequence[float], cfg: SweepConfig) -> list[ResidualRow]:
    return sorted((residual_case(e, cfg) for e in eps_values), key=lambda r: r.eps)


@dataclass(frozen=True)
class TruncationRow:
    eps: float
    f_resid_l2: float
    g_resid_l2: float
    g_direct_l2: float
    diff_l2: float

    COLUMNS = ("eps", "f_resid_l2", "g_resid_l2")


def truncation_study(
    eps_values: Sequence[float],
    profile: nls.Profile,
    c: float = 0.25,
    slow_length: Optional[float] = None,
    slow_points: int = 4096,
    lam: float = nls.LAMBDA_WW,
    wave_kmax: float = 4.0,
    window: str = "sharp",
) -> list[TruncationRow]:
    """Truncation residual ``f~`` and envelope defect ``g`` at slow time 0 for each eps.

    ``g`` is evaluated both through the modulation identity and directly.
    """
    if slow_length is None:
        slow_length = 80.0 * profile.width if profile.kind != "sobolev_tail" else 2 * np.pi * 16
    rows = []
    for eps in eps_values:
        grids = nls.PacketGrids.build(eps, slow_length, slow_points, wave_kmax)
        u = profile.sample(grids.slow)
        f = nls.truncation_residual(u, eps, c, lam, window)
        g_id = nls.envelope_residual(grids, u, 0.0, c, lam, window)
        g_dir = nls.envelope_residual_direct(grids, u, 0.0, c, lam, window)
        rows.append(TruncationRow(eps, f.l2(), g_id.l2(), g_dir.l2(), (g_id - g_dir).l2()))
    return sorted(rows, key=lambda r: r.eps)


def _random_pair(grid: GridSpec, rng: np.random.Generator, band=(-3.0, -0.5)) -> tuple[Field, Field]:
    w = random_band_limited(grid, band, rng).with_zero_mean()
    q = random_band_limited(grid, band, rng).with_zero_mean()
    return w, q


def quadratic_cancellation_study(amplitudes: Sequence[float], grid: GridSpec, seed: int = 0) -> list[tuple[float, float]]:
    """Defect of the quadratic normal form along the exact flow versus amplitude.

    The transform is quadratic in the state, so its time derivative is the
    exact centred difference along ``(W_t, Q_t)``.
    """
    rng = np.random.default_rng(seed)
    w0, q0 = _random_pair(grid, rng)
    ik = 1j * grid.k
    out = []
    for h in amplitudes:
        st = WWState(w0 * h, q0 * h)
        dw, dq = ww_rhs(st)
        p = forward_quadratic(WWState(st.w_field + dw, st.q_field + dq))
        m = forward_quadratic(WWState(st.w_field - dw, st.q_field - dq))
        ts = forward_quadratic(st)
        wt_t = (p.wt.spectral - m.wt.spectral) / 2
        qt_t = (p.qt.spectral - m.qt.spectral) / 2
        g = Field(grid, wt_t + ik * ts.qt.spectral)
        k = Field(grid, qt_t - 1j * ts.wt.spectral)
        out.append((h, float(np.hypot(g.l2(), k.l2()))))
    return out


def cubic_system_study(amplitudes: Sequence[float], grid: GridSpec, seed: int = 0) -> list[tuple[float, float]]:
    """Defect of the cubic normal-form system along the exact flow versus amplitude."""
    rng = np.random.default_rng(seed)
    w0, q0 = _random_pair(grid, rng)
    out = []
    for h in amplitudes:
        st = WWState(w0 * h, q0 * h)
        dw, dq = ww_rhs(st)
        acc_w = np.zeros(grid.n_points, dtype=complex)
        acc_q = np.zeros(grid.n_points, dtype=complex)
        for s, wgt in ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)):
            p = forward_cubic(WWState(st.w_field + dw * s, st.q_field + dq * s))
            acc_w += wgt * p.wt.spectral
            acc_q += wgt * p.qt.spectral
        ts = forward_cubic(st)
        ts_t = TransformedState(Field(grid, acc_w / 12), Field(grid, acc_q / 12))
        out.append((h, tilde_residual(ts, ts_t).total_l2))
    return out


def inverse_study(amplitudes: Sequence[float], grid: GridSpec, seed: int = 0) -> list[tuple[float, float]]:
    """``forward_cubic(invert_normal_form(ts)) - ts`` in the energy norm versus amplitude."""
    rng = np.random.default_rng(seed)
    w0, q0 = _random_pair(grid, rng)
    out = []
    for h in amplitudes:
        ts = TransformedState(w0 * h, q0 * h)
        back = forward_cubic(invert_normal_form(ts))
        out.append((h, h_space_norm(back.wt - ts.wt, back.qt - ts.qt)))
    return out


def linearization_check(eps: float, cfg: SweepConfig) -> float:
    """Relative mismatch between the linearized flow at ``(bW, R)`` and the exact ``(bW_t, R_t)``."""
    grids = cfg.grids(eps)
    u = cfg.profile.sample(grids.slow)
    state = _initial_state(grids, u, cfg.c_trunc)
    d = derive_diff_state(state)
    lw, lr = linearized_rhs(d.bw, d.r, state)
    ew, er = diff_time_derivative(state)
    num = math.hypot((lw - ew).l2(), (lr - er).l2())
    den = math.hypot(ew.l2(), er.l2())
    return num / den if den > 0 else num


def hamiltonian_drift(eps: float, cfg: SweepConfig, n_samples: int = 20) -> tuple[float, float]:
    """Max relative Hamiltonian drift over ``[0, T_slow / eps^2]`` and the step used."""
    grids = cfg.grids(eps)
    g = grids.wave
    u = cfg.profile.sample(grids.slow)
    st = _initial_state(grids, u, cfg.c_trunc)
    t_final = cfg.T_slow / eps**2
    dt_max = cfg.dt_factor / math.sqrt(g.k_nyquist)
    t_s = t_final / n_samples
    sub = max(1, math.ceil(t_s / dt_max - 1e-9))
    dt = t_s / sub
    integ = LawsonRK4(g, dt)
    e0 = hamiltonian(st)
    w, q, mean = st.w_field.spectral, st.q_field.spectral, 0j
    worst = 0.0
    for _ in range(n_samples):
        for _ in range(sub):
            w, q, mean = integ.step_with_mean(w, q, mean)
        e = hamiltonian(WWState(Field(g, w), Field(g, q), 0.0, mean))
        worst = max(worst, abs(e - e0) / abs(e0))
    return worst, dt


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def with_eps(cfg: SweepConfig, eps_values: Sequence[float]) -> SweepConfig:
    return replace(cfg, eps_values=tuple(sorted(eps_values, reverse=True)))
