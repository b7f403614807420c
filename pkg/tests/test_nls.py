import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holowave import nls
from holowave.spectral import Field, GridSpec, random_band_limited

from oracles import plane

SLOW = GridSpec(4096, 320.0)


def gaussian(grid=SLOW, amp=1.0, width=4.0):
    return nls.Profile("gaussian", amp, width).sample(grid)


# ---------------------------------------------------------------------------
# split-step flow


@pytest.mark.parametrize("m,amp", [(3, 0.5), (-7, 1.2)])
def test_plane_wave_step_matches_exact_solution(m, amp):
    g = GridSpec(64, 2 * np.pi * 4)
    k = 2 * np.pi * m / g.length
    lam = nls.LAMBDA_WW
    for dt in (1e-2, 5e-3):
        st0 = nls.NlsState(plane(g, m, amp), lam=lam)
        out = nls.nls_step(st0, dt)
        exact = plane(g, m, amp) * np.exp(-1j * (k**2 / 8 + lam * amp**2) * dt)
        assert np.max(np.abs(out.u.physical - exact.physical)) <= 10 * dt**3
        assert out.t == dt


def test_zero_stays_zero():
    out = nls.nls_evolve(nls.NlsState(Field.zeros(SLOW)), 0.5)
    assert np.all(out.u.spectral == 0)
    assert nls.nls_invariants(out) == (0.0, 0.0)


def test_mass_conserved_over_1000_steps():
    st = nls.NlsState(gaussian())
    m0, _ = nls.nls_invariants(st)
    for _ in range(1000):
        st = nls.nls_step(st, 1e-3)
    m1, _ = nls.nls_invariants(st)
    assert abs(m1 - m0) / m0 <= 1e-10


def test_gaussian_mass_quadrature():
    amp = 1.3
    g = GridSpec(1024, 40.0)
    u = nls.Profile("gaussian", amp, 1.0).sample(g)
    mass, _ = nls.nls_invariants(nls.NlsState(u))
    assert mass == pytest.approx(amp**2 * math.sqrt(math.pi / 2), rel=1e-12)


def test_hamiltonian_drift_unit_time():
    st = nls.NlsState(gaussian())
    _, h0 = nls.nls_invariants(st)
    worst = 0.0
    for j in range(1, 11):
        st = nls.nls_evolve(st, j / 10)
        worst = max(worst, abs(nls.nls_invariants(st)[1] - h0) / abs(h0))
    assert worst <= 1e-8


def test_time_reversal():
    st = nls.NlsState(gaussian())
    u = nls._strang(SLOW, st.u.physical, 1e-3, st.lam, st.dispersion_coeff, 200)
    back = nls._strang(SLOW, u, -1e-3, st.lam, st.dispersion_coeff, 200)
    assert np.max(np.abs(back - st.u.physical)) <= 1e-12


def test_time_derivative_matches_flow():
    st = nls.NlsState(gaussian())
    h = 1e-4
    fwd = nls._strang(SLOW, st.u.physical, h, st.lam, st.dispersion_coeff)
    bwd = nls._strang(SLOW, st.u.physical, -h, st.lam, st.dispersion_coeff)
    fd = Field.from_physical(SLOW, (fwd - bwd) / (2 * h))
    exact = nls.nls_time_derivative(st.u)
    assert (fd - exact).l2() <= 1e-6 * exact.l2()


# ---------------------------------------------------------------------------
# truncation


def test_truncate_band_limited_is_identity(rng):
    u = random_band_limited(SLOW, (-1.0, 1.0), rng)
    assert np.array_equal(nls.truncate(u, 0.1, 0.25).spectral, u.spectral)
    assert np.all(nls.truncate(Field.zeros(SLOW), 0.1, 0.25).spectral == 0)


@pytest.mark.parametrize("eps", [0.02, 0.01, 0.005])
def test_truncation_difference_bound(eps):
    s = 3.0
    g = GridSpec(65536, 2 * np.pi * 16)
    u = nls.Profile("sobolev_tail", 1.0, 4.0, s=s).sample(g)
    c = 0.25
    diff = (nls.truncate(u, eps, c) - u).l2()
    # modes beyond c/eps gain at least (eps |xi| / c)^s >= 1
    hs = math.sqrt(g.length * np.sum(np.abs(g.k) ** (2 * s) * np.abs(u.spectral) ** 2))
    assert diff <= (eps / c) ** s * hs


def test_truncation_residual_vanishes_for_narrow_band(rng):
    # triple products of |xi| <= 0.2 stay within 0.6 < c/eps = 2.5
    u = random_band_limited(SLOW, (-0.2, 0.2), rng)
    f = nls.truncation_residual(u, 0.1, 0.25)
    assert f.l2() <= 1e-14 * u.l2()


def test_gaussian_truncation_residual_is_super_algebraic():
    eps = (0.2, 0.16, 0.125)
    r = [nls.truncation_residual(gaussian(), e, 0.25).l2() for e in eps]
    local = np.diff(np.log(r)) / np.diff(np.log(eps))
    assert np.all(local > 4.0)


def test_smooth_step_shape():
    x = np.array([0.0, 0.5, 0.75, 1.0, 2.0])
    v = nls.smooth_step(x)
    assert v[0] == v[1] == 1.0 and v[3] == v[4] == 0.0
    assert v[2] == pytest.approx(0.5)
    assert np.all(np.diff(nls.smooth_step(np.linspace(0, 1.2, 200))) <= 0)


def test_cutoff_beyond_nyquist_is_rejected():
    with pytest.raises(ValueError):
        nls.cutoff_window(GridSpec(64, 320.0), 1e-3, 0.25)


# ---------------------------------------------------------------------------
# rescale / modulate


def test_rescale_norm_scalings():
    eps = 0.25
    u = nls.Profile("gaussian", 1.0, 2.0).sample(GridSpec(256, 40.0))
    ue = nls.rescale(u, eps, GridSpec(1024, 40.0 / eps))
    assert ue.l2() == pytest.approx(eps**0.5 * u.l2(), rel=1e-12)
    assert np.max(np.abs(ue.physical)) == pytest.approx(eps * np.max(np.abs(u.physical)), rel=1e-12)


def test_rescale_off_lattice_uses_direct_evaluation():
    eps = 0.25
    u = nls.Profile("gaussian", 1.0, 2.0).sample(GridSpec(256, 40.0))
    ue = nls.rescale(u, eps, GridSpec(2048, 1.5 * 40.0 / eps))
    assert ue.l2() == pytest.approx(eps**0.5 * u.l2(), rel=1e-10)


def test_rescale_maps_support():
    g = GridSpec(256, 40.0)
    k0 = g.k[5]
    u = Field.from_physical(g, np.exp(1j * k0 * g.x))
    ue = nls.rescale(u, 0.5, GridSpec(512, 80.0))
    peak = np.argmax(np.abs(ue.spectral))
    assert ue.grid.k[peak] == pytest.approx(0.5 * k0)


def test_rescale_rejects_aliasing():
    u = plane(GridSpec(256, 40.0), 100)
    with pytest.raises(ValueError):
        nls.rescale(u, 0.5, GridSpec(64, 80.0))


def test_modulate_at_time_zero_and_isometry(rng):
    g = GridSpec(512, 2 * np.pi * 20)
    ue = random_band_limited(g, (-0.5, 0.5), rng)
    y = nls.modulate(ue, 0.0)
    assert np.allclose(y.physical, np.exp(-1j * g.x) * ue.physical, atol=1e-13)
    y = nls.modulate(ue, 3.7)
    assert y.l2() == pytest.approx(ue.l2(), rel=1e-13)
    k_on = g.k[np.abs(y.spectral) > 1e-12]
    assert k_on.min() >= -1.5 - 1e-12 and k_on.max() <= -0.5 + 1e-12


def test_modulate_needs_2pi_multiple():
    with pytest.raises(ValueError):
        nls.modulate(Field.zeros(GridSpec(16, 10.0)), 0.0)


def test_packet_routes_agree():
    # spectral index transfer versus rescale followed by modulate
    grids = nls.PacketGrids.build(0.1, 2 * np.pi * 16, 4096, 4.0)
    u = nls.truncate(nls.Profile("sobolev_tail", 1.0, 4.0).sample(grids.slow), 0.1, 0.25)
    y1 = nls.packet(grids, u, 0.7)
    y2 = nls.modulate(nls.rescale(u, 0.1, grids.wave), 0.7)
    assert (y1 - y2).l2() <= 1e-13 * y1.l2()


def test_packet_grid_geometry():
    grids = nls.PacketGrids.build(0.13, 320.0, 4096, 12.0)
    assert grids.wave.length == pytest.approx(2 * np.pi * grids.shift)
    assert grids.slow.length == pytest.approx(0.13 * grids.wave.length)
    assert grids.wave.k_nyquist >= 12.0
    assert grids.wave.n_points & (grids.wave.n_points - 1) == 0


# ---------------------------------------------------------------------------
# dispersion relations


def test_dispersion_values():
    assert nls.omega0(-1.0) == 1.0 and nls.omega_plus(-1.0) == 1.0
    assert nls.omega_plus(-4.0) == 2.0
    with pytest.raises(ValueError):
        nls.omega_plus(1.0)


def test_dispersion_cubic_tangency():
    xi = np.linspace(-1.5, -0.5, 2001)
    h = xi + 1
    nz = h != 0
    ratio = np.abs(nls.omega0(xi) - nls.omega_plus(xi))[nz] / np.abs(h[nz]) ** 3
    assert ratio.max() <= 1 / 8
    # leading Taylor coefficient of sqrt(1 - h) beyond second order is 1/16
    assert ratio[np.argmin(np.abs(h[nz]))] == pytest.approx(1 / 16, rel=1e-2)


# ---------------------------------------------------------------------------
# envelope residual


def test_envelope_residual_vanishes_for_band_limited_data(rng):
    grids = nls.PacketGrids.build(0.1, 2 * np.pi * 16, 1024, 4.0)
    u = random_band_limited(grids.slow, (-0.3, 0.3), rng)
    assert nls.envelope_residual(grids, u, 1.0, 0.25).l2() <= 1e-14


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([0.2, 0.1, 0.05]), st.floats(0.0, 50.0))
def test_envelope_residual_identity_and_scaling(eps, t):
    grids = nls.PacketGrids.build(eps, 2 * np.pi * 16, 4096, 4.0)
    u = nls.Profile("sobolev_tail", 1.0, 4.0, s=3.0).sample(grids.slow)
    g_id = nls.envelope_residual(grids, u, t, 0.25)
    g_dir = nls.envelope_residual_direct(grids, u, t, 0.25)
    f = nls.truncation_residual(u, eps, 0.25)
    assert (g_id - g_dir).l2() <= 1e-9 * g_dir.l2()
    assert g_id.l2() == pytest.approx(eps**2.5 * f.l2(), rel=1e-12)


def test_bundle_fields():
    grids = nls.PacketGrids.build(0.1, 320.0, 4096, 4.0)
    b = nls.build_bundle(grids, gaussian(grids.slow), 0.0, 0.25)
    assert b.y_eps.grid == grids.wave
    assert b.y_eps.l2() == pytest.approx(grids.eps**0.5 * b.u_trunc.l2(), rel=1e-12)
    assert b.f_resid.grid == grids.slow


def test_profile_validation_and_sobolev_peak():
    with pytest.raises(ValueError):
        nls.Profile("square")
    u = nls.Profile("sobolev_tail", 0.7, 4.0, s=2.0, seed=3).sample(GridSpec(1024, 100.0))
    assert np.max(np.abs(u.physical)) == pytest.approx(0.7)
    v = nls.Profile("sech", 2.0, 1.0).sample(GridSpec(1024, 100.0))
    assert np.max(np.abs(v.physical)) == pytest.approx(2.0)


def test_packet_spec_validation():
    with pytest.raises(ValueError):
        nls.PacketSpec(1.5)
    with pytest.raises(ValueError):
        nls.PacketSpec(0.1, c_trunc=0.5)
