import dataclasses

import pytest

from nepv import ConfigError, parse_config, preset
from nepv.config import PRESET_NAMES, emit_config, parse_config_text

MINIMAL_KS = """\
[experiment]
kind = ks-perturb

[ks]
"""


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)


def test_minimal_config_fills_defaults():
    spec = parse_config_text(MINIMAL_KS)
    assert spec.kind == "ks-perturb"
    assert spec.section == "ks"
    assert spec.params == {"n": 50, "k": 8, "gamma": 1.0, "seed": 0}
    assert spec.sweep == ({"h": 0.05, "eps1": 0.0, "eps2": 0.0},)
    assert (spec.seed, spec.samples, spec.refine_passes) == (0, 500, 1)
    assert spec.init == "default"
    assert spec.out == "ks-perturb.csv"


def test_errbound_kinds_default_to_random_init():
    spec = parse_config_text("[experiment]\nkind = ks-scf-errbounds\n\n[ks]\n")
    assert spec.init == "random"
    forced = parse_config_text(
        "[experiment]\nkind = ks-perturb\ninit = random\n\n[ks]\n")
    assert forced.init == "random"


def test_missing_experiment_section():
    with pytest.raises(ConfigError, match=r"\[experiment\]"):
        parse_config_text("[ks]\nn = 10\n")


def test_missing_kind():
    with pytest.raises(ConfigError, match="kind"):
        parse_config_text("[experiment]\nseed = 1\n\n[ks]\n")


def test_missing_instance_section():
    with pytest.raises(ConfigError, match=r"requires a \[tr\] section"):
        parse_config_text("[experiment]\nkind = tr-perturb\n")


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match=r"unknown section \[solver\]"):
        parse_config_text(MINIMAL_KS + "\n[solver]\ntol = 1e-10\n")


def test_unknown_key_names_line():
    text = "[experiment]\nkind = ks-perturb\n\n[ks]\nbogus = 3\n"
    with pytest.raises(ConfigError, match="ks.bogus on line 5"):
        parse_config_text(text)


def test_malformed_value_names_key_and_line():
    text = "[experiment]\nkind = ks-perturb\n\n[ks]\nh = 0.05, banana\n"
    with pytest.raises(ConfigError, match="ks.h on line 5"):
        parse_config_text(text)
    with pytest.raises(ConfigError, match="ks.n on line 5"):
        parse_config_text("[experiment]\nkind = ks-perturb\n\n[ks]\nn = many\n")


def test_tr_eps_and_delta_target_are_exclusive():
    base = "[experiment]\nkind = tr-perturb\n\n[tr]\n"
    with pytest.raises(ConfigError, match="mutually exclusive"):
        parse_config_text(base + "eps = 1e-3\ndelta_target = 1e-6\n")
    with pytest.raises(ConfigError, match="needs tr.eps or tr.delta_target"):
        parse_config_text(base)
    assert parse_config_text(base + "eps = 1e-3\n").sweep == (
        {"eps": 1e-3, "beta": 10.0},)


def test_eps_broadcast_and_mismatch():
    text = ("[experiment]\nkind = ks-perturb\n\n[ks]\n"
            "eps1 = 1e-3, 1e-4, 1e-5\neps2 = 0.0\n")
    spec = parse_config_text(text)
    assert [pt["eps2"] for pt in spec.sweep] == [0.0, 0.0, 0.0]
    bad = ("[experiment]\nkind = ks-perturb\n\n[ks]\n"
           "eps1 = 1e-3, 1e-4\neps2 = 0.0, 0.0, 0.0\n")
    with pytest.raises(ConfigError, match="match in length"):
        parse_config_text(bad)


def test_ks_sweep_crosses_h_with_zipped_eps():
    text = ("[experiment]\nkind = ks-perturb\n\n[ks]\n"
            "h = 0.05, 0.06\neps1 = 1e-3, 1e-4\neps2 = 2e-3, 2e-4\n")
    spec = parse_config_text(text)
    assert spec.sweep == (
        {"h": 0.05, "eps1": 1e-3, "eps2": 2e-3},
        {"h": 0.05, "eps1": 1e-4, "eps2": 2e-4},
        {"h": 0.06, "eps1": 1e-3, "eps2": 2e-3},
        {"h": 0.06, "eps1": 1e-4, "eps2": 2e-4},
    )


def test_preset_shapes():
    t1 = preset("table1")
    assert t1.kind == "ks-perturb"
    assert len(t1.sweep) == 40
    assert t1.sweep[0] == {"h": 0.05, "eps1": 1e-3, "eps2": 1e-3}
    t2 = preset("table2")
    assert t2.kind == "tr-perturb"
    assert len(t2.sweep) == 15
    assert [pt["beta"] for pt in t2.sweep[:5]] == [5.0, 8.0, 10.0, 12.0, 15.0]
    assert t2.sweep[0]["delta_target"] == 1e-12
    t3 = preset("table3")
    assert t3.kind == "tr-scf-errbounds"
    assert t3.sweep == ({"beta": 5.0}, {"beta": 10.0}, {"beta": 15.0})
    assert t3.init == "random"


def test_preset_overrides_and_unknown_name():
    spec = preset("table1", seed=42, samples=100, out="x.csv")
    assert (spec.seed, spec.samples, spec.out) == (42, 100, "x.csv")
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("table9")
    assert PRESET_NAMES == ("table1", "table2", "table3")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_emit_parse_round_trip(name):
    spec = dataclasses.replace(preset(name), seed=7, samples=50)
    assert parse_config_text(emit_config(spec)) == spec


def test_emit_round_trip_on_zipped_eps():
    text = ("[experiment]\nkind = ks-perturb\nseed = 3\n\n[ks]\n"
            "h = 0.05, 0.06\neps1 = 1e-3, 1e-4\neps2 = 2e-3, 2e-4\n")
    spec = parse_config_text(text)
    assert parse_config_text(emit_config(spec)) == spec


def test_single_solve_section_detection():
    good = "[experiment]\nkind = single-solve\n\n[linear]\nn = 12\nk = 2\n"
    spec = parse_config_text(good)
    assert spec.section == "linear"
    assert spec.params == {"n": 12, "k": 2, "seed": 0, "end": "smallest"}
    assert spec.sweep == ({},)
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config_text("[experiment]\nkind = single-solve\n\n[ks]\n\n[tr]\n")
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config_text("[experiment]\nkind = single-solve\n")


def test_single_solve_requires_scalar_lists():
    text = "[experiment]\nkind = single-solve\n\n[ks]\nh = 0.05, 0.06\n"
    with pytest.raises(ConfigError, match="scalar ks.h"):
        parse_config_text(text)
    ok = parse_config_text("[experiment]\nkind = single-solve\n\n[ks]\nh = 0.1\n")
    assert ok.params["h"] == 0.1


def test_invalid_experiment_settings():
    with pytest.raises(ConfigError, match="unknown experiment kind"):
        parse_config_text("[experiment]\nkind = quantum\n\n[ks]\n")
    with pytest.raises(ConfigError, match="init"):
        parse_config_text("[experiment]\nkind = ks-perturb\ninit = zeros\n\n[ks]\n")
    with pytest.raises(ConfigError, match="samples"):
        parse_config_text("[experiment]\nkind = ks-perturb\nsamples = 0\n\n[ks]\n")
    with pytest.raises(ConfigError, match="unknown key experiment.mode on line 3"):
        parse_config_text("[experiment]\nkind = ks-perturb\nmode = fast\n\n[ks]\n")


def test_parse_config_reads_files(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(MINIMAL_KS)
    assert parse_config(path) == parse_config_text(MINIMAL_KS)
    with pytest.raises(ConfigError, match="syntax"):
        parse_config_text("kind = ks-perturb\n")
