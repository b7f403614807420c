import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holowave.spectral import (
    Field,
    GridSpec,
    SurfaceDegeneracyError,
    derivative,
    field_csv,
    fractional_multiplier,
    h_space_norm,
    hilbert,
    hk_norm,
    norms,
    product,
    proj_neg,
    proj_pos,
    random_band_limited,
    read_snapshot,
    reciprocal,
    resample,
    write_snapshot,
)
from holowave.spectral import decode_snapshot, encode_snapshot

from oracles import dense_coeffs, dense_eval, plane

G = GridSpec(64, 2 * np.pi)


def close(a: Field, b: Field, tol=1e-13):
    return np.max(np.abs(a.physical - b.physical)) <= tol


# ---------------------------------------------------------------------------
# grids


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        GridSpec(100, 1.0)
    with pytest.raises(ValueError):
        GridSpec(64, 0.0)


def test_wavenumbers_and_lattice_index():
    g = GridSpec(16, 4 * np.pi)
    assert g.k_nyquist == pytest.approx(np.pi * 16 / (4 * np.pi))
    assert g.k[g.index_of(-1.5)] == pytest.approx(-1.5)
    with pytest.raises(ValueError):
        g.index_of(0.3)


# ---------------------------------------------------------------------------
# Hilbert transform and projections


def test_hilbert_cos_is_sin():
    f = Field.from_physical(G, np.cos(G.x))
    assert close(hilbert(f), Field.from_physical(G, np.sin(G.x)))


def test_hilbert_negative_mode():
    e = plane(G, -1)
    assert close(hilbert(e), e * 1j)


def test_hilbert_kills_constants():
    assert close(hilbert(Field.from_physical(G, np.full(G.n_points, 3.0))), Field.zeros(G))


def test_projection_examples():
    assert close(proj_neg(plane(G, -1)), plane(G, -1))
    assert close(proj_neg(plane(G, 1)), Field.zeros(G))
    c = Field.from_physical(G, np.full(G.n_points, 2.0 + 1j))
    assert close(proj_neg(c), c / 2)


def _random_field(seed: int, g=G) -> Field:
    r = np.random.default_rng(seed)
    return random_band_limited(g, (-g.k_nyquist * 0.9, g.k_nyquist * 0.9), r)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projection_identities(seed):
    f = _random_field(seed)
    # P + Pbar = I and P = (I - iH)/2
    assert close(proj_neg(f) + proj_pos(f), f, 1e-12)
    assert close(proj_neg(f), (f - hilbert(f) * 1j) / 2, 1e-12)
    # P^2 = P and H^2 = -I on mean-free fields (P halves the mean)
    f0 = f.with_zero_mean()
    assert close(proj_neg(proj_neg(f0)), proj_neg(f0), 1e-12)
    assert close(hilbert(hilbert(f0)), -f0, 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hilbert_against_dense_oracle(seed):
    f = _random_field(seed)
    c, xi = dense_coeffs(G, f.physical)
    ref = dense_eval(xi, -1j * np.sign(xi) * c, G.x)
    assert np.max(np.abs(hilbert(f).physical - ref)) <= 1e-10 * np.max(np.abs(f.physical))


# ---------------------------------------------------------------------------
# multipliers


def test_fractional_multiplier_examples():
    assert close(fractional_multiplier(plane(G, -1), 0.5), plane(G, -1))
    assert close(fractional_multiplier(plane(G, -2), -0.5), plane(G, -2) * 2**-0.5)
    const = Field.from_physical(G, np.ones(G.n_points))
    assert close(fractional_multiplier(const, 1.0), Field.zeros(G))
    with pytest.raises(ValueError):
        fractional_multiplier(const, -0.5)


def test_derivative_of_plane_wave():
    assert close(derivative(plane(G, -3)), plane(G, -3) * (-3j), 1e-12)


# ---------------------------------------------------------------------------
# products


def test_product_examples():
    e = plane(G, -1)
    assert close(product(e, e), plane(G, -2))
    assert close(product(e, Field.zeros(G)), Field.zeros(G))


def test_product_matches_convolution_oracle(rng):
    g = GridSpec(64, 2 * np.pi * 2)
    band = 0.4 * g.k_nyquist  # band sum stays below the filter ramp
    f = random_band_limited(g, (-band, band), rng)
    h = random_band_limited(g, (-band, band), rng)
    cf, xi = dense_coeffs(g, f.physical)
    ch, _ = dense_coeffs(g, h.physical)
    # brute-force convolution over lattice indices
    idx = np.rint(xi * g.length / (2 * np.pi)).astype(int)
    conv = {}
    for a, ca in zip(idx, cf):
        for b, cb in zip(idx, ch):
            conv[a + b] = conv.get(a + b, 0) + ca * cb
    ref = np.zeros(g.n_points, dtype=complex)
    for m, v in conv.items():
        if -g.n_points // 2 <= m < g.n_points // 2:
            ref[m % g.n_points] = v
    out = product(f, h).spectral
    assert np.max(np.abs(out - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_reciprocal_examples():
    one = Field.from_physical(G, np.ones(G.n_points))
    assert close(reciprocal(one), one)
    vals = 1 + 0.2 * np.cos(G.x)
    r = reciprocal(Field.from_physical(G, vals))
    assert np.max(np.abs(r.physical - 1 / vals)) <= 1e-10
    # off-grid points through the dense evaluator
    c, xi = dense_coeffs(G, r.physical)
    xq = np.linspace(0, G.length, 301)
    assert np.max(np.abs(dense_eval(xi, c, xq) - 1 / (1 + 0.2 * np.cos(xq)))) <= 1e-10


def test_reciprocal_rejects_small_values():
    f = Field.from_physical(G, 0.55 + 0.45 * np.cos(G.x))  # min 0.1
    with pytest.raises(SurfaceDegeneracyError):
        reciprocal(f)


# ---------------------------------------------------------------------------
# norms


def test_l2_parseval():
    a = 0.7
    assert norms(plane(G, -1, a), Field.zeros(G)).l2 == pytest.approx(a * math.sqrt(2 * np.pi), rel=1e-14)


def test_half_norm_against_quadrature():
    # <|D|^{1/4} q, |D|^{1/4} q> by quadrature of the physical multiplier output
    q = plane(G, -1)
    half = fractional_multiplier(q, 0.25)
    quad = math.sqrt(np.sum(np.abs(half.physical) ** 2) * G.dx)
    assert norms(Field.zeros(G), q).homog_half == pytest.approx(quad, rel=1e-13)
    assert quad == pytest.approx(math.sqrt(2 * np.pi), rel=1e-13)


def test_zero_pair_norms():
    z = Field.zeros(G)
    r = norms(z, z)
    assert r.l2 == r.homog_half == r.h_space == r.linf == r.besov_proxy == 0
    assert all(v == 0 for v in r.hk)


def test_hk_norm_weights_derivatives():
    w = plane(G, -2)
    q = Field.zeros(G)
    # |d^j w|^2 = 4^j * 2 pi
    expect = math.sqrt(2 * np.pi * (1 + 4 + 16))
    assert hk_norm(w, q, 2) == pytest.approx(expect, rel=1e-14)
    assert hk_norm(w, q, 0) == pytest.approx(h_space_norm(w, q))


def test_resample_roundtrip(rng):
    f = random_band_limited(G, (-10, 10), rng)
    up = resample(f, GridSpec(256, G.length))
    assert np.allclose(resample(up, G).spectral, f.spectral, atol=1e-15)
    assert up.l2() == pytest.approx(f.l2())


# ---------------------------------------------------------------------------
# snapshot and CSV formats


def test_snapshot_roundtrip(tmp_path, rng):
    w = random_band_limited(G, (-5, 0), rng)
    q = random_band_limited(G, (-5, 0), rng)
    path = tmp_path / "s.hlwv"
    write_snapshot(path, [w, q], t=1.25)
    snap = read_snapshot(path)
    assert snap.grid == G and snap.t == 1.25 and len(snap.fields) == 2
    assert np.allclose(snap.fields[0].physical, w.physical, rtol=0, atol=1e-15)
    assert np.allclose(snap.fields[1].physical, q.physical, rtol=0, atol=1e-15)
    assert path.read_bytes()[:4] == b"HLWV"
    assert len(path.read_bytes()) == 32 + 2 * 16 * G.n_points


def test_snapshot_rejects_corruption():
    data = encode_snapshot([plane(G, -1)])
    with pytest.raises(ValueError):
        decode_snapshot(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        decode_snapshot(data[:-3])
    with pytest.raises(ValueError):
        decode_snapshot(data[:10])


def test_csv_export():
    text = field_csv(plane(GridSpec(4, 2 * np.pi), 0))
    lines = text.splitlines()
    assert lines[0] == "x,re,im"
    assert len(lines) == 5
    assert [float(v) for v in lines[1].split(",")] == [0.0, 1.0, 0.0]
