#!/usr/bin/env python3
"""
Tests for key=value run configuration files
"""
import os
import tempfile

from exceptions import ConfigError
from run_config import RunConfig

EXAMPLE = """
# poisson fit with a short chain
family.name = poisson
prior.d=4
prior.a=auto
sampler.warmup=200
sampler.reproducible=yes
data.intercept=true   # add a constant covariate
select.cv=1
out.dir=runs/poisson
"""


def _config_error(text: str) -> str:
    try:
        RunConfig.from_text(text, source="run.cfg").validate()
    except ConfigError as e:
        return str(e)
    raise AssertionError(f"accepted: {text!r}")


def test_parse_typed_values():
    config = RunConfig.from_text(EXAMPLE)
    assert config.family.name == "poisson"
    assert config.hyper.d == 4 and config.hyper.a is None
    assert config.sampler.warmup == 200 and config.sampler.reproducible is True
    assert config.data.intercept is True and config.select.cv is True
    assert config.out_dir == "runs/poisson"
    assert config.sampler.draws == 5000 and config.prior == "ssibp"


def test_errors_carry_line_numbers():
    assert "run.cfg: line 2" in _config_error("family.name=poisson\nprior.dd=3\n")
    assert "line 1" in _config_error("sampler.warmup=many\n")
    assert "line 3" in _config_error("\n# comment\nno equals sign\n")
    assert "bad value" in _config_error("data.intercept=maybe\n")
    assert "unknown key" in _config_error("colour.name=red\n")


def test_validation():
    assert "link" in _config_error("family.name=poisson\nfamily.link=logit\n")
    assert "prior.kind" in _config_error("prior.kind=horseshoe\n")
    assert "d_min" in _config_error("select.d_min=5\nselect.d_max=2\n")
    assert "folds" in _config_error("select.cv=true\nselect.folds=1\n")
    _config_error("sampler.target_accept=1.5\n")
    RunConfig.from_text("prior.kind=gaussian\n").validate()


def test_text_roundtrip():
    config = RunConfig.from_text(EXAMPLE)
    again = RunConfig.from_text(config.to_text())
    assert again == config
    assert again.to_dict()["prior.a"] is None
    assert "prior.a=none" in config.to_text()


def test_update_skips_unset_values():
    config = RunConfig().update({"sampler.seed": 11, "sampler.chains": None, "out.dir": "elsewhere"})
    assert config.sampler.seed == 11 and config.sampler.chains == 1
    assert config.out_dir == "elsewhere"


def test_simulation_settings_follow_family():
    config = RunConfig.from_text("family.name=tweedie\nsimulate.n=30\nsampler.seed=4\n")
    sim = config.sim_config()
    assert (sim.family, sim.n, sim.seed) == ("tweedie", 30, 4)
    config.set("simulate.family", "poisson")
    assert config.sim_config().family == "poisson" and config.sim_config().link is None
    assert RunConfig.from_text("select.d_min=2\nselect.d_max=4\n").d_grid() == [2, 3, 4]


def test_from_file():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "run.cfg")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("sampler.draws=50\n")
        assert RunConfig.from_file(path).sampler.draws == 50
        try:
            RunConfig.from_file(os.path.join(tmp, "missing.cfg"))
        except ConfigError:
            return
    raise AssertionError("missing config file accepted")


if __name__ == "__main__":
    from testing import main

    main(globals())
