import json

import pytest

from holoretrieve.classical import PaganinConfig
from holoretrieve.config import ConfigError, RunConfig, from_dict, load_config, parse_text, with_mode


def test_defaults_carry_standard_constants():
    cfg = load_config(None)
    assert cfg.optics.wavelength == 1e-10 and cfg.optics.distance == 0.1 and cfg.optics.pixel_size == 1e-6
    assert cfg.synth.material.delta == 1e-3 and cfg.synth.material.beta == 1e-6
    assert cfg.synth.noise.total_photons == 6.6e7
    assert cfg.train.gen_lr == 2e-4 and cfg.train.disc_lr == 1e-4
    assert cfg.loss.lambda_cyc == 20 and cfg.loss.lambda_frc == 10


def test_toml_and_json_equivalent(tmp_path):
    (tmp_path / "a.toml").write_text('seed = 4\n[optics]\ndistance = 0.2\n[train]\nepochs = 3\n[loss]\nlambda_frc = 2.0\n')
    (tmp_path / "a.json").write_text(json.dumps({"seed": 4, "optics": {"distance": 0.2}, "train": {"epochs": 3},
                                                 "loss": {"lambda_frc": 2.0}}))
    a, b = load_config(tmp_path / "a.toml"), load_config(tmp_path / "a.json")
    assert a.to_dict() == b.to_dict()
    assert a.train.seed == 4 and a.train.epochs == 3 and a.optics.distance == 0.2
    assert a.synth.scene.pixel_size == a.optics.pixel_size


def test_echo_round_trip(tmp_path):
    cfg = from_dict({"seed": 9, "scene": {"frame": 32}, "synth": {"pairing": "paired", "noise": False},
                     "iterative": {"amplitude_min": 0.5}})
    (tmp_path / "echo.json").write_text(cfg.to_json())
    again = load_config(tmp_path / "echo.json")
    assert again.to_json() == cfg.to_json()
    assert again.synth.noise.enabled is False and again.iterative.resolve().amplitude_bounds == (0.5, float("inf"))


@pytest.mark.parametrize(
    "raw,needle",
    [
        ({"bogus": 1}, "bogus"),
        ({"optics": {"wavelenght": 1}}, "optics.wavelenght"),
        ({"train": {"seed": 1}}, "train.seed"),
        ({"train": {"mode": "gan"}}, "train"),
        ({"train": {"epochs": 0}}, "train"),
        ({"optics": {"wavelength": -1.0}}, "optics"),
        ({"synth": {"pairing": "both"}}, "synth.pairing"),
        ({"seed": -1}, "seed"),
        ({"loss": {"lambda_cyc": -1}}, "loss"),
        ({"optics": 3}, "optics"),
    ],
)
def test_rejections_name_key(raw, needle):
    with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
        from_dict(raw)


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_text("[[[", ".toml")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError, match="bad.json"):
        load_config(tmp_path / "bad.json")
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.toml")


def test_paths_not_echoed():
    cfg = from_dict({"paths": {"data": "/x"}})
    assert cfg.paths == {"data": "/x"} and "paths" not in cfg.to_dict()


def test_paganin_resolution():
    cfg = RunConfig()
    p = cfg.paganin.resolve(cfg.optics)
    assert p.wavelength == 1e-10 and p.distance == 0.1
    assert cfg.paganin.resolve(cfg.optics, aps=True) == PaganinConfig.aps()
    q = from_dict({"paganin": {"energy_kev": 25.7, "distance": 5e-3}}).paganin.resolve(cfg.optics)
    assert q == PaganinConfig.aps()


def test_with_mode():
    assert with_mode(RunConfig(), "cyclegan").train.mode == "cyclegan"
    with pytest.raises(ConfigError):
        with_mode(RunConfig(), "nope")
