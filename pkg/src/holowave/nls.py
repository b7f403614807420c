"""Cubic NLS envelopes and the truncate / rescale / modulate pipeline.

The envelope solves ``i U_t + U_xx / 8 = lam U |U|^2`` on a slow periodic grid.
A packet at wave scale ``eps`` is ``Y(t, x) = e^{it} e^{-ix} eps U(eps^2 t, eps (x - t/2))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .spectral import Field, GridSpec, from_fine, to_fine, to_phys

DISPERSION = 1.0 / 8.0
LAMBDA_WW = -0.5


@dataclass(frozen=True)
class Profile:
    """Initial envelope recipe.

    ``kind`` is ``"gaussian"`` (``A exp(-(x/w)^2)``), ``"sech"`` (``A sech(x/w)``)
    or ``"sobolev_tail"`` (random phases, spectral amplitude
    ``(1 + |xi|)^(-s - 1/2 - 0.01)``, peak modulus ``A``).
    """

    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 4.0
    s: float = 3.0
    seed: int = 1234

    def __post_init__(self):
        if self.kind not in ("gaussian", "sech", "sobolev_tail"):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    def sample(self, grid: GridSpec) -> Field:
        x = grid.x - grid.length / 2
        if self.kind == "gaussian":
            return Field.from_physical(grid, self.amplitude * np.exp(-((x / self.width) ** 2)))
        if self.kind == "sech":
            return Field.from_physical(grid, self.amplitude / np.cosh(x / self.width))
        rng = np.random.default_rng(self.seed)
        k = grid.k
        amp = (1.0 + np.abs(k)) ** (-self.s - 0.5 - 0.01)
        amp[np.abs(k) > grid.k_nyquist / 2] = 0.0
        phase = np.exp(2j * np.pi * rng.random(grid.n_points))
        c = amp * phase
        peak = np.max(np.abs(to_phys(c)))
        return Field(grid, c * (self.amplitude / peak))


@dataclass(frozen=True)
class PacketSpec:
    epsilon: float
    c_trunc: float = 0.25
    profile: Profile = field(default_factory=Profile)
    T_slow: float = 0.5

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.c_trunc <= 0.25:
            raise ValueError("c_trunc must lie in (0, 1/4]")


@dataclass(frozen=True)
class NlsState:
    u: Field
    t: float = 0.0
    lam: float = LAMBDA_WW
    dispersion_coeff: float = DISPERSION


@dataclass(frozen=True)
class EnvelopeBundle:
    u_trunc: Field
    y_eps: Field
    f_resid: Field
    g_resid: Field


# ---------------------------------------------------------------------------
# NLS flow


def _cube(grid: GridSpec, c: np.ndarray) -> np.ndarray:
    v = to_fine(grid, c)
    return from_fine(grid, v * (v.real**2 + v.imag**2), filtered=False)


def nls_step(state: NlsState, dt: float) -> NlsState:
    """One Strang step: half nonlinear rotation, exact linear flow, half rotation."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = _strang(state.u.grid, state.u.physical, dt, state.lam, state.dispersion_coeff)
    return replace(state, u=Field.from_physical(state.u.grid, u), t=state.t + dt)


def _strang(grid: GridSpec, u: np.ndarray, dt: float, lam: float, beta: float, n: int = 1) -> np.ndarray:
    lin = np.exp(-1j * beta * grid.k**2 * dt)
    half = -1j * lam * dt / 2
    for _ in range(n):
        u = u * np.exp(half * (u.real**2 + u.imag**2))
        u = np.fft.ifft(np.fft.fft(u) * lin)
        u = u * np.exp(half * (u.real**2 + u.imag**2))
    return u


def nls_evolve(state: NlsState, t_final: float, dt: float = 1e-3) -> NlsState:
    """Advance to ``t_final`` with the largest step <= ``dt`` that lands on it exactly."""
    span = t_final - state.t
    if span < 0:
        raise ValueError("cannot evolve backwards")
    if span == 0:
        return state
    n = int(np.ceil(span / dt - 1e-12))
    u = _strang(state.u.grid, state.u.physical, span / n, state.lam, state.dispersion_coeff, n)
    return replace(state, u=Field.from_physical(state.u.grid, u), t=t_final)


def nls_invariants(state: NlsState) -> tuple[float, float]:
    """Mass and Hamiltonian ``int |U_x|^2/8 + lam |U|^4 / 2``."""
    g = state.u.grid
    c = state.u.spectral
    mass = g.length * np.sum(np.abs(c) ** 2)
    grad = g.length * np.sum(g.k**2 * np.abs(c) ** 2)
    v = to_fine(g, c)
    quartic = np.mean(np.abs(v) ** 4) * g.length
    return float(mass), float(state.dispersion_coeff * grad + 0.5 * state.lam * quartic)


def nls_time_derivative(u: Field, lam: float = LAMBDA_WW, beta: float = DISPERSION) -> Field:
    """``U_t = i beta U_xx - i lam U|U|^2``."""
    g = u.grid
    c = u.spectral
    return Field(g, -1j * beta * g.k**2 * c - 1j * lam * _cube(g, c))


# ---------------------------------------------------------------------------
# truncation


WINDOWS = ("sharp", "smooth")


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity window: 1 on ``x <= 1/2``, 0 on ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    out = (x <= 0.5).astype(float)
    m = (x > 0.5) & (x < 1.0)
    y = 2.0 * (x[m] - 0.5)
    a = np.exp(-1.0 / (1.0 - y))
    b = np.exp(-1.0 / y)
    out[m] = a / (a + b)
    return out


def cutoff_window(grid: GridSpec, eps: float, c: float, window: str = "sharp") -> np.ndarray:
    """Spectral weights of the truncation ``P_{<= c/eps}``.

    ``"sharp"`` is the indicator of ``|xi| <= c/eps``; ``"smooth"`` a
    Littlewood-Paley type window equal to 1 below ``c/(2 eps)`` and
    vanishing beyond ``c/eps``.
    """
    cut = c / eps
    if cut > grid.k_nyquist:
        raise ValueError(f"cutoff {cut:.3g} beyond grid Nyquist {grid.k_nyquist:.3g}")
    if window == "sharp":
        return (np.abs(grid.k) <= cut).astype(float)
    if window == "smooth":
        return smooth_step(np.abs(grid.k) / cut)
    raise ValueError(f"unknown window {window!r}")


def truncate(u: Field, eps: float, c: float, window: str = "sharp") -> Field:
    """Spectral cutoff keeping ``|xi| <= c / eps``."""
    return Field(u.grid, cutoff_window(u.grid, eps, c, window) * u.spectral)


def truncation_residual(u: Field, eps: float, c: float, lam: float = LAMBDA_WW, window: str = "sharp") -> Field:
    """NLS defect of the truncated envelope: ``lam (P(U|U|^2) - Ut|Ut|^2)``."""
    g = u.grid
    chi = cutoff_window(g, eps, c, window)
    ut = chi * u.spectral
    return Field(g, lam * (chi * _cube(g, u.spectral) - _cube(g, ut)))


# ---------------------------------------------------------------------------
# rescale / modulate


def omega0(xi):
    h = np.asarray(xi, dtype=float) + 1.0
    return 1.0 - 0.5 * h - 0.125 * h**2


def omega_plus(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi > 0):
        raise ValueError("omega_plus is defined for xi <= 0")
    return np.sqrt(np.abs(xi))


def _lattice_ratio(src: GridSpec, dst: GridSpec, eps: float) -> Optional[float]:
    # dilated source frequencies eps*2pi j/Ls coincide with 2pi m/L when L = Ls/eps
    r = dst.length * eps / src.length
    return r if abs(r - round(r)) < 1e-9 and round(r) == 1 else None


def rescale(u: Field, eps: float, target: GridSpec, tol: float = 1e-12) -> Field:
    """``eps U(eps x)`` on ``target``.

    Exact index transfer when ``target.length == u.grid.length / eps``; otherwise
    the trig polynomial is evaluated on the dilated points (zero outside the
    source period).
    """
    src = u.grid
    if _lattice_ratio(src, target, eps) is not None:
        n_src, n_dst = src.n_points, target.n_points
        js = np.fft.fftfreq(n_src, 1.0 / n_src).astype(int)
        keep = (js >= -n_dst // 2) & (js < n_dst // 2)
        lost = np.sum(np.abs(u.spectral[~keep]) ** 2)
        if lost > tol**2 * max(np.sum(np.abs(u.spectral) ** 2), np.finfo(float).tiny):
            raise ValueError("resampling would alias: source band exceeds target Nyquist")
        c = np.zeros(n_dst, dtype=complex)
        c[js[keep] % n_dst] = eps * u.spectral[keep]
        return Field(target, c)
    if src.length / eps > target.length * (1 + 1e-12):
        raise ValueError("target grid too short for the dilated envelope")
    # band check: dilated max frequency must sit under the target Nyquist
    sig = np.abs(u.spectral) > tol * np.max(np.abs(u.spectral), initial=0.0)
    if np.any(sig) and eps * np.max(np.abs(src.k[sig])) > target.k_nyquist:
        raise ValueError("resampling would alias: source band exceeds target Nyquist")
    # target x measured from the domain centre maps to source x from its centre
    y = (target.x - target.length / 2) * eps + src.length / 2
    inside = (y >= 0) & (y < src.length)
    vals = np.zeros(target.n_points, dtype=complex)
    for chunk in np.array_split(np.nonzero(inside)[0], max(1, inside.sum() // 2048)):
        vals[chunk] = np.exp(1j * np.outer(y[chunk], src.k)) @ u.spectral
    return Field.from_physical(target, eps * vals)


def modulate(u_eps: Field, t: float) -> Field:
    """``e^{it} e^{-ix} U(x - t/2)``; requires the domain length to be a multiple of 2 pi."""
    g = u_eps.grid
    m = g.length / (2 * np.pi)
    mi = int(round(m))
    if abs(m - mi) > 1e-9 * max(m, 1.0):
        raise ValueError("modulation by e^{-ix} needs a domain length multiple of 2 pi")
    shifted = u_eps.spectral * np.exp(-0.5j * g.k * t) * np.exp(1j * t)
    return Field(g, np.roll(shifted, -mi))


# ---------------------------------------------------------------------------
# packet geometry


@dataclass(frozen=True)
class PacketGrids:
    """Matched slow and wave grids: ``wave.length = 2 pi M`` and ``slow.length = eps * wave.length``."""

    eps: float
    slow: GridSpec
    wave: GridSpec
    shift: int

    @classmethod
    def build(
        cls,
        eps: float,
        slow_length: float,
        slow_points: int = 4096,
        wave_kmax: float = 12.0,
        wave_points: Optional[int] = None,
    ) -> PacketGrids:
        m = max(1, int(round(slow_length / (2 * np.pi * eps))))
        wave_len = 2 * np.pi * m
        if wave_points is None:
            need = wave_len * wave_kmax / np.pi
            wave_points = 1 << int(np.ceil(np.log2(need)))
        slow = GridSpec(slow_points, eps * wave_len)
        wave = GridSpec(wave_points, wave_len)
        return cls(eps=eps, slow=slow, wave=wave, shift=m)


def envelope_coeffs(grids: PacketGrids, u_slow: np.ndarray, t: float, du_slow: Optional[np.ndarray] = None):
    """Wave-grid coefficients of the modulated packet built from slow coefficients.

    With ``du_slow`` (the slow-time derivative) the exact wave-time derivative
    is returned as well.
    """
    eps = grids.eps
    ns, nw = grids.slow.n_points, grids.wave.n_points
    js = np.fft.fftfreq(ns, 1.0 / ns).astype(int)
    tgt = js - grids.shift
    keep = (tgt >= -nw // 2) & (tgt < nw // 2)
    kap = 2 * np.pi * js[keep] / grids.wave.length
    phase = eps * np.exp(1j * t - 0.5j * kap * t)
    y = np.zeros(nw, dtype=complex)
    y[tgt[keep] % nw] = phase * u_slow[keep]
    if du_slow is None:
        return y
    dy = np.zeros(nw, dtype=complex)
    dy[tgt[keep] % nw] = (1j - 0.5j * kap) * phase * u_slow[keep] + eps**2 * phase * du_slow[keep]
    return y, dy


def packet(grids: PacketGrids, u: Field, t: float) -> Field:
    """``Y^eps`` at wave time ``t`` from the slow envelope ``U(eps^2 t)``."""
    return Field(grids.wave, envelope_coeffs(grids, u.spectral, t))


def envelope_residual(
    grids: PacketGrids, u: Field, t: float, c: float, lam: float = LAMBDA_WW, window: str = "sharp"
) -> Field:
    """Envelope-equation defect of the truncated packet at wave time ``t``.

    ``u`` is the exact NLS solution at slow time ``eps^2 t``.  The defect is
    ``e^{i(t-x)} eps^3 f(eps^2 t, eps(x - t/2))`` with ``f`` the truncation
    residual; ``envelope_coeffs`` supplies one factor of ``eps``.
    """
    f = truncation_residual(u, grids.eps, c, lam, window)
    return Field(grids.wave, grids.eps**2 * envelope_coeffs(grids, f.spectral, t))


def envelope_residual_direct(
    grids: PacketGrids, u: Field, t: float, c: float, lam: float = LAMBDA_WW, window: str = "sharp"
) -> Field:
    """Same defect evaluated as ``(i d_t + omega0(D)) Yt - lam Yt |Yt|^2`` directly."""
    ut = truncate(u, grids.eps, c, window)
    du = truncate(nls_time_derivative(u, lam), grids.eps, c, window)
    y, dy = envelope_coeffs(grids, ut.spectral, t, du.spectral)
    wg = grids.wave
    yy = to_fine(wg, y)
    cube = from_fine(wg, yy * np.abs(yy) ** 2, filtered=False)
    return Field(wg, 1j * dy + omega0(wg.k) * y - lam * cube)


def build_bundle(
    grids: PacketGrids, u: Field, t: float, c: float, lam: float = LAMBDA_WW, window: str = "sharp"
) -> EnvelopeBundle:
    ut = truncate(u, grids.eps, c, window)
    return EnvelopeBundle(
        u_trunc=ut,
        y_eps=packet(grids, ut, t),
        f_resid=truncation_residual(u, grids.eps, c, lam, window),
        g_resid=envelope_residual(grids, u, t, c, lam, window),
    )
