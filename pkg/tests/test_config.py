import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critical_hawkes.config import dump_config, load_config, parse_config
from critical_hawkes.errors import ConfigError
from critical_hawkes.params import Homogeneous, Inhomogeneous, IntensityFn, ModelConfig, SelfExciting


def test_empty_file_gives_defaults():
    assert parse_config("").model == ModelConfig()


def test_dotted_and_table_forms_agree():
    a = parse_config("f.p = 2.0\nf.s = 0.5\n").model
    b = parse_config("[f]\np = 2.0\ns = 0.5\n").model
    assert a == b
    assert a.intensity == IntensityFn(p=2.0, s=0.5)


def test_unknown_key_reports_key_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("n_agents = 10\n\nbogus = 1\n")
    assert exc.value.key == "bogus"
    assert exc.value.line == 3


def test_nested_unknown_key():
    with pytest.raises(ConfigError) as exc:
        parse_config("[f]\np = 1.0\nq = 2.0\n")
    assert exc.value.key == "f.q"
    assert exc.value.line == 3


def test_validation_error_carries_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("beta = 2.0\ngamma = 1.5\n")
    assert (exc.value.key, exc.value.line) == ("gamma", 2)


@pytest.mark.parametrize(
    "text, key",
    [
        ("n_agents = 1.5", "n_agents"),
        ("n_agents = true", "n_agents"),
        ('beta = "two"', "beta"),
        ("variant = 3", "variant"),
        ("atoms = [[1.0, 0.5]]", "atoms"),
    ],
)
def test_type_errors(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.key == key


def test_variant_specific_keys():
    with pytest.raises(ConfigError):
        parse_config("kappa = 1.0\n")
    with pytest.raises(ConfigError):
        parse_config('variant = "inhomogeneous"\nbeta = 2.0\n')
    cfg = parse_config('variant = "self_exciting"\nkappa = 0.5\n').model
    assert cfg.agents == SelfExciting(2.0, 0.5, 0.5)


def test_malformed_toml_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("n_agents = 10\nbeta = = 2\n")
    assert exc.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_h_key():
    assert parse_config("h = 7.5").h == 7.5
    with pytest.raises(ConfigError):
        parse_config("h = -1.0")


@st.composite
def model_configs(draw):
    kind = draw(st.sampled_from(["homogeneous", "self_exciting", "inhomogeneous"]))
    beta = draw(st.floats(1.0, 10.0))
    gamma = draw(st.floats(0.05, 1.0))
    if kind == "homogeneous":
        agents = Homogeneous(beta, gamma)
    elif kind == "self_exciting":
        agents = SelfExciting(beta, gamma, draw(st.floats(0.0, 3.0)))
    else:
        w = draw(st.floats(0.05, 0.95))
        agents = Inhomogeneous(((beta, gamma, w), (1.0, 0.5, 1.0 - w)))
    return ModelConfig(
        n_agents=draw(st.integers(1, 10**6)),
        intensity=IntensityFn(p=draw(st.floats(0.01, 10.0)), s=draw(st.floats(0.01, 10.0))),
        agents=agents,
        horizon=draw(st.floats(0.01, 10.0)),
        grid_points=draw(st.integers(1, 4096)),
        seed=draw(st.integers(0, 2**63 - 1)),
    )


@settings(max_examples=100, deadline=None)
@given(model_configs(), st.one_of(st.none(), st.floats(0.1, 100.0)))
def test_dump_parse_roundtrip(cfg, h):
    loaded = parse_config(dump_config(cfg, h))
    assert loaded.model == cfg
    assert loaded.h == h
