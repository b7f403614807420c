"""Normal form transformations and the packet approximate solution.

Conventions: every transformed field is re-projected onto negative
frequencies with the zero mode removed.  Inner projections whose output is
fed back as part of a state (the nested ``P[Re W W_a]`` terms of the inverse)
also drop the zero mode, since the state itself is kept mean free.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import nls
from .spectral import Field, GridSpec, from_fine, hk_norm, proj_neg_c, to_fine
from .waterwave import WWState, _project, rhs_arrays

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransformedState:
    wt: Field
    qt: Field

    @property
    def grid(self) -> GridSpec:
        return self.wt.grid


@dataclass(frozen=True)
class DiagonalPair:
    y_plus: Field
    y_minus: Field


@dataclass(frozen=True)
class ResidualPair:
    g: Field
    k: Field
    g_l2: float
    k_l2: float

    @classmethod
    def of(cls, g: Field, k: Field) -> ResidualPair:
        return cls(g, k, g.l2(), k.l2())

    @property
    def total_l2(self) -> float:
        return float(np.hypot(self.g_l2, self.k_l2))


@dataclass(frozen=True)
class CubicFields:
    g_res: Field
    g_null: Field
    k_res: Field
    k_null: Field

    @property
    def g3(self) -> Field:
        return self.g_res + self.g_null

    @property
    def k3(self) -> Field:
        return self.k_res + self.k_null


Pair = Union[WWState, TransformedState]


def _arrays(s: Pair) -> tuple[GridSpec, np.ndarray, np.ndarray]:
    if isinstance(s, WWState):
        return s.grid, s.w_field.spectral, s.q_field.spectral
    return s.grid, s.wt.spectral, s.qt.spectral


class _Ops:
    """Fine-grid product helpers bound to one grid."""

    def __init__(self, g: GridSpec):
        self.g = g
        self.k = g.k
        self.ik = 1j * g.k

    def fine(self, c):
        return to_fine(self.g, c)

    def coarse(self, v):
        # polynomial products: the oversampled grid already removes aliasing
        return from_fine(self.g, v, filtered=False)

    def P(self, v):
        return proj_neg_c(self.coarse(v), self.k)

    def P0(self, v):
        out = self.P(v)
        out[0] = 0.0
        return out

    def d(self, c):
        return self.ik * c


# ---------------------------------------------------------------------------
# forward transforms


def _quad_arrays(ops: _Ops, w, q):
    rew = ops.fine(w).real
    wt = w - 2 * ops.P(rew * ops.fine(ops.d(w)))
    qt = q - 2 * ops.P(rew * ops.fine(ops.d(q)))
    return wt, qt


def _cubic_corr(ops: _Ops, w, x):
    wf = ops.fine(w)
    xa = ops.fine(ops.d(x))
    return 0.5 * ops.d(ops.coarse(wf**2 * xa)) + 0.5 * ops.d(ops.P(np.conj(wf) ** 2 * xa))


def forward_quadratic(state: Pair) -> TransformedState:
    """``W - 2P[Re W W_a]``, ``Q - 2P[Re W Q_a]``."""
    g, w, q = _arrays(state)
    ops = _Ops(g)
    wt, qt = _quad_arrays(ops, w, q)
    return TransformedState(Field(g, _project(wt, g.k)), Field(g, _project(qt, g.k)))


def forward_cubic(state: Pair) -> TransformedState:
    """Quadratic transform plus the cubic correction removing non-resonant cubic terms."""
    g, w, q = _arrays(state)
    ops = _Ops(g)
    wt, qt = _quad_arrays(ops, w, q)
    wt = wt + _cubic_corr(ops, w, w)
    qt = qt + _cubic_corr(ops, w, q)
    return TransformedState(Field(g, _project(wt, g.k)), Field(g, _project(qt, g.k)))


# ---------------------------------------------------------------------------
# cubic vector fields


def cubic_fields(state: Pair) -> CubicFields:
    """Cubic part of the transformed equations split into resonant and null pieces."""
    g, w, q = _arrays(state)
    ops = _Ops(g)
    wf = ops.fine(w)
    wa = ops.fine(ops.d(w))
    qa = ops.fine(ops.d(q))
    wab, qab = np.conj(wa), np.conj(qa)
    inner = ops.fine(ops.P(qab * wa - wab * qa))
    g_null = ops.d(ops.coarse(wf * ops.fine(ops.P(wa * qab - qa * wab))))
    mod2 = qa.real**2 + qa.imag**2
    k_null = ops.coarse(wf * ops.fine(ops.P(ops.fine(ops.d(ops.coarse(mod2)))))) + ops.coarse(qa * inner)
    k_res = ops.d(ops.P(qa**2 * np.conj(wf)))
    zero = Field.zeros(g)
    return CubicFields(
        g_res=zero,
        g_null=Field(g, _project(g_null, g.k)),
        k_res=Field(g, _project(k_res, g.k)),
        k_null=Field(g, _project(k_null, g.k)),
    )


# ---------------------------------------------------------------------------
# diagonal variables


def _half_pow(g: GridSpec, s: float) -> np.ndarray:
    ak = np.abs(g.k)
    out = np.zeros_like(ak)
    out[ak > 0] = ak[ak > 0] ** s
    return out


def diagonalize(ts: TransformedState) -> DiagonalPair:
    g = ts.grid
    dq = _half_pow(g, 0.5) * ts.qt.spectral
    return DiagonalPair(
        Field(g, 0.5 * (ts.wt.spectral + dq)),
        Field(g, 0.5 * (ts.wt.spectral - dq)),
    )


def undiagonalize(dp: DiagonalPair, tol: float = 1e-12) -> TransformedState:
    g = dp.y_plus.grid
    diff = dp.y_plus.spectral - dp.y_minus.spectral
    scale = max(np.sqrt(np.sum(np.abs(diff) ** 2)), np.finfo(float).tiny)
    if abs(diff[0]) > tol * scale:
        raise ValueError("nonzero mean cannot be mapped through |D|^(-1/2)")
    return TransformedState(
        Field(g, dp.y_plus.spectral + dp.y_minus.spectral),
        Field(g, _half_pow(g, -0.5) * diff),
    )


# ---------------------------------------------------------------------------
# packet construction and inverse transform


def _check_support(y: Field, c: float, tol: float = 1e-12):
    k = y.grid.k
    p = np.abs(y.spectral) ** 2
    tot = p.sum()
    if tot == 0:
        return
    out = p[np.abs(k + 1.0) > c + 1e-12].sum()
    if np.sqrt(out / tot) > tol:
        raise ValueError(f"packet support violation: relative mass {np.sqrt(out / tot):.2e} outside [-1-c, -1+c]")


def _packet_arrays(ops: _Ops, y, dy=None):
    yf = ops.fine(y)
    cube = ops.coarse(yf * (yf.real**2 + yf.imag**2))
    inv = _half_pow(ops.g, -0.5)
    wt = y - 0.25 * cube
    qt = inv * (y + 0.25 * cube)
    if dy is None:
        return wt, qt
    dyf = ops.fine(dy)
    dcube = ops.coarse(2 * (yf.real**2 + yf.imag**2) * dyf + yf**2 * np.conj(dyf))
    return wt, qt, dy - 0.25 * dcube, inv * (dy + 0.25 * dcube)


def build_packet(y_eps: Field, c: Optional[float] = 0.25) -> TransformedState:
    """``W~ = Y - Y|Y|^2/4``, ``Q~ = |D|^(-1/2)(Y + Y|Y|^2/4)``.

    ``c`` is the half-width of the admissible band around frequency -1
    (``None`` skips the check).
    """
    if c is not None:
        _check_support(y_eps, c)
    g = y_eps.grid
    wt, qt = _packet_arrays(_Ops(g), y_eps.spectral)
    return TransformedState(Field(g, _project(wt, g.k)), Field(g, _project(qt, g.k)))


def _inverse_arrays(ops: _Ops, wt, qt):
    rew = ops.fine(wt).real
    wta = ops.fine(ops.d(wt))
    qta = ops.fine(ops.d(qt))
    bw = ops.P0(rew * wta)
    bq = ops.P0(rew * qta)
    re_bw = ops.fine(bw).real
    wtf = ops.fine(wt)
    cw = 0.5 * ops.d(ops.coarse(wtf**2 * wta)) + 0.5 * ops.d(ops.P(np.conj(wtf) ** 2 * wta))
    cq = 0.5 * ops.d(ops.coarse(wtf**2 * qta)) + 0.5 * ops.d(ops.P(np.conj(wtf) ** 2 * qta))
    w = wt + 2 * bw + 4 * ops.P(re_bw * wta) + 4 * ops.P(rew * ops.fine(ops.d(bw))) - cw
    q = qt + 2 * bq + 4 * ops.P(re_bw * qta) + 4 * ops.P(rew * ops.fine(ops.d(bq))) - cq
    return _project(w, ops.k), _project(q, ops.k)


def invert_normal_form(ts: TransformedState, t: float = 0.0) -> WWState:
    """Cubic-order inverse of :func:`forward_cubic`."""
    g = ts.grid
    w, q = _inverse_arrays(_Ops(g), ts.wt.spectral, ts.qt.spectral)
    return WWState(Field(g, w), Field(g, q), t)


def inverse_derivative(ts: TransformedState, dts: TransformedState) -> tuple[Field, Field]:
    """Directional derivative of :func:`invert_normal_form` along ``dts``.

    The map is a cubic polynomial, so the five-point stencil is exact up to roundoff.
    """
    g = ts.grid
    ops = _Ops(g)
    w0, q0 = ts.wt.spectral, ts.qt.spectral
    dw, dq = dts.wt.spectral, dts.qt.spectral
    n0 = np.sqrt(np.sum(np.abs(w0) ** 2) + np.sum(np.abs(q0) ** 2))
    n1 = np.sqrt(np.sum(np.abs(dw) ** 2) + np.sum(np.abs(dq) ** 2))
    if n1 == 0:
        return Field.zeros(g), Field.zeros(g)
    h = (n0 if n0 > 0 else 1.0) / n1
    acc_w = np.zeros(g.n_points, dtype=complex)
    acc_q = np.zeros(g.n_points, dtype=complex)
    for s, wgt in ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)):
        w, q = _inverse_arrays(ops, w0 + s * h * dw, q0 + s * h * dq)
        acc_w += wgt * w
        acc_q += wgt * q
    return Field(g, acc_w / (12 * h)), Field(g, acc_q / (12 * h))


# ---------------------------------------------------------------------------
# packet path: envelope -> (Y~, W~, Q~, W, Q) with time derivatives


@dataclass(frozen=True)
class PacketSnapshot:
    t: float
    y: Field
    y_t: Field
    tilde: TransformedState
    tilde_t: TransformedState
    full: WWState
    full_t: tuple[Field, Field]


def packet_snapshot(grids: nls.PacketGrids, u: Field, t: float, c: float, lam: float = nls.LAMBDA_WW) -> PacketSnapshot:
    """Packet built from the exact envelope ``u = U(eps^2 t)`` with exact time derivatives.

    ``Y~_t`` follows from the modulation phases plus the NLS right-hand side
    (truncated); the rest by the chain rule through the polynomial maps.
    """
    eps = grids.eps
    g = grids.wave
    ut = nls.truncate(u, eps, c)
    dut = nls.truncate(nls.nls_time_derivative(u, lam), eps, c)
    y, dy = nls.envelope_coeffs(grids, ut.spectral, t, dut.spectral)
    ops = _Ops(g)
    wt, qt, dwt, dqt = _packet_arrays(ops, y, dy)
    tilde = TransformedState(Field(g, _project(wt, g.k)), Field(g, _project(qt, g.k)))
    tilde_t = TransformedState(Field(g, _project(dwt, g.k)), Field(g, _project(dqt, g.k)))
    full = invert_normal_form(tilde, t)
    full_t = inverse_derivative(tilde, tilde_t)
    return PacketSnapshot(t, Field(g, y), Field(g, dy), tilde, tilde_t, full, full_t)


def packet_snapshot_fd(
    grids: nls.PacketGrids, u: Field, t: float, c: float, dtau_rel: float = 1e-3, lam: float = nls.LAMBDA_WW
) -> PacketSnapshot:
    """Same as :func:`packet_snapshot` but with centred differences in time.

    The envelope is moved by ``+-eps^2 * dtau_rel`` in slow time with the
    split-step flow (wave time step ``dtau_rel``).
    """
    eps = grids.eps
    g = grids.wave
    dt = dtau_rel

    def at(sign):
        us = Field.from_physical(u.grid, nls._strang(u.grid, u.physical, sign * eps**2 * dt, lam, nls.DISPERSION, 1))
        y = nls.envelope_coeffs(grids, nls.truncate(us, eps, c).spectral, t + sign * dt)
        ts = build_packet(Field(g, y), None)
        return Field(g, y), ts, invert_normal_form(ts)

    y0, ts0, full0 = at(0)
    yp, tsp, fp = at(1)
    ym, tsm, fm = at(-1)

    def cd(a: Field, b: Field) -> Field:
        return Field(g, (a.spectral - b.spectral) / (2 * dt))

    return PacketSnapshot(
        t,
        y0,
        cd(yp, ym),
        ts0,
        TransformedState(cd(tsp.wt, tsm.wt), cd(tsp.qt, tsm.qt)),
        WWState(full0.w_field, full0.q_field, t),
        (cd(fp.w_field, fm.w_field), cd(fp.q_field, fm.q_field)),
    )


# ---------------------------------------------------------------------------
# residuals


def tilde_residual(ts: TransformedState, ts_t: TransformedState) -> ResidualPair:
    """Defect of ``(W~, Q~)`` in the cubic normal-form system."""
    g = ts.grid
    cf = cubic_fields(ts)
    ik = 1j * g.k
    gg = ts_t.wt.spectral + ik * ts.qt.spectral - cf.g3.spectral
    kk = ts_t.qt.spectral - 1j * ts.wt.spectral - cf.k3.spectral
    return ResidualPair.of(Field(g, _project(gg, g.k)), Field(g, _project(kk, g.k)))


def approx_residual(state: WWState, state_t: tuple[Field, Field], order: int = 2) -> tuple[ResidualPair, float]:
    """Defect of ``(W, Q)`` in the full system and its ``H^order`` norm."""
    g = state.grid
    rw, rq = rhs_arrays(g, state.w_field.spectral, state.q_field.spectral)
    gg = Field(g, _project(state_t[0].spectral - rw, g.k))
    kk = Field(g, _project(state_t[1].spectral - rq, g.k))
    return ResidualPair.of(gg, kk), hk_norm(gg, kk, order)


def band_fraction(f: Field, c: float) -> float:
    """Fraction of L2 mass at frequencies within ``c`` of -1."""
    p = np.abs(f.spectral) ** 2
    tot = p.sum()
    if tot == 0:
        return 0.0
    return float(p[np.abs(f.grid.k + 1.0) <= c].sum() / tot)
