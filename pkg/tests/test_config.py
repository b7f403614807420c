import pytest
from hypothesis import given, settings, strategies as st

from holowave import config
from holowave.harness import SweepConfig


def test_parse_comments_blanks_and_overrides():
    text = "# header\n\nt_slow = 0.5  # slow time\neps_list = 0.2, 0.1\nt_slow = 0.25\n"
    assert config.parse_text(text) == {"t_slow": "0.25", "eps_list": "0.2, 0.1"}


def test_parse_rejects_malformed_lines():
    with pytest.raises(config.ConfigError, match="line 2"):
        config.parse_text("t_slow = 1\njust words\n")
    with pytest.raises(config.ConfigError):
        config.parse_text(" = 3\n")


def test_build_keys():
    rc = config.build(
        {
            "eps_list": "0.2 0.15, 0.1 0.05",
            "profile.kind": "sech",
            "profile.width": "2",
            "lambda": "-0.25",
            "n_rule": "points:2048",
            "dt_rule": "0.1",
            "sobolev_index": "3",
            "out_dir": "results",
        },
        env={},
    )
    s = rc.sweep
    assert s.eps_values == (0.2, 0.15, 0.1, 0.05)
    assert s.profile.kind == "sech" and s.profile.width == 2.0
    assert s.lam == -0.25 and s.wave_points == 2048 and s.dt_factor == 0.1 and s.N_sobolev == 3
    assert rc.out_dir == "results"
    assert config.build({"n_rule": "9"}, env={}).sweep.wave_kmax == 9.0


@pytest.mark.parametrize(
    "values",
    [{"bogus": "1"}, {"t_slow": "soon"}, {"n_rule": "cells:3"}, {"eps_list": "0.1 0.2"}, {"profile": "square"}],
)
def test_build_rejects_bad_values(values):
    with pytest.raises(config.ConfigError):
        config.build(values, env={})


def test_seed_environment_override():
    assert config.build({"seed": "3"}, env={config.SEED_ENV: "99"}).sweep.seed == 99
    assert config.build({"seed": "3"}, env={}).sweep.seed == 3
    with pytest.raises(config.ConfigError):
        config.build({}, env={config.SEED_ENV: "x"})


def test_resolve_seed(monkeypatch):
    monkeypatch.delenv(config.SEED_ENV, raising=False)
    assert config.resolve_seed(7) == 7
    monkeypatch.setenv(config.SEED_ENV, "11")
    assert config.resolve_seed(7) == 11


def test_load_missing_file_names_path(tmp_path):
    p = tmp_path / "nope.cfg"
    with pytest.raises(config.ConfigError, match=str(p)):
        config.load(p)


def test_dump_round_trip(tmp_path):
    cfg = SweepConfig(eps_values=(0.3, 0.2, 0.1, 0.05), T_slow=0.75, wave_points=1024, seed=5)
    p = tmp_path / "c.cfg"
    p.write_text(config.dump(cfg, "out"))
    rc = config.load(p, env={})
    assert rc.sweep == cfg and rc.out_dir == "out" and rc.source == str(p)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(0.01, 0.49), min_size=1, max_size=6, unique=True),
    st.floats(0.01, 2.0),
    st.floats(1.0, 40.0),
    st.integers(0, 2**31 - 1),
    st.integers(1, 200),
)
def test_dump_round_trip_property(eps, t_slow, kmax, seed, nck):
    cfg = SweepConfig(
        eps_values=tuple(sorted(eps, reverse=True)), T_slow=t_slow, wave_kmax=kmax, seed=seed, n_checkpoints=nck
    )
    assert config.build(config.parse_text(config.dump(cfg)), env={}).sweep == cfg
