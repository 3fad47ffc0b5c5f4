import textwrap

import numpy as np
import pytest

from phonolase import config
from phonolase.config import ConfigError, RunSpec, SweepSpec, parse_config, spec_from_dict
from phonolase.model import EffectiveParams


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_minimal_config_defaults(tmp_path):
    spec = parse_config(write(tmp_path, """
        [model]
        g1 = 0.2
        g2 = 0.15
        [dissipation]
        gamma2 = 2.5
    """))
    assert isinstance(spec, RunSpec)
    assert spec.decay.gamma1 == 1.0 and spec.decay.gamma2 == 2.5
    assert spec.params.r == config.DEFAULT_R == 0.7
    assert spec.target_tail == 1e-6
    assert spec.cutoff is None
    assert any("r = 0.7" in a for a in spec.assumptions)
    echo = spec.echo()
    assert echo["r"] == 0.7 and echo["gamma1"] == 1.0 and echo["cutoff"] == "adaptive"


def test_explicit_r_is_not_flagged():
    spec = spec_from_dict({"model": {"g1": 0.2, "g2": 0.15, "r": 0.3}, "dissipation": {"gamma2": 2.5}})
    assert spec.assumptions == ()


def test_both_parameter_forms_rejected():
    doc = {"model": {"g1": 0.2, "g2": 0.15, "sidebands": {"g1b": 0.2, "g2r": 0.15}}}
    with pytest.raises(ConfigError) as err:
        spec_from_dict(doc)
    assert err.value.field == "model"
    with pytest.raises(ConfigError):
        RunSpec()
    with pytest.raises(ConfigError):
        RunSpec(params=EffectiveParams(0.1, 0.1), sidebands=config.SidebandCouplings(0.1))


def test_sideband_form():
    spec = spec_from_dict({"model": {"sidebands": {"g1b": 0.2, "g1r": 0.12, "g2b": 0.09, "g2r": 0.15}}})
    assert spec.effective().r == pytest.approx(np.arctanh(0.6))
    with pytest.raises(ConfigError) as err:
        spec_from_dict({"model": {"sidebands": {"g1b": 0.2, "g1r": 0.12, "g2b": 0.01, "g2r": 0.15}}})
    assert err.value.field == "model"


def test_fig3_sweep_config(tmp_path):
    spec = parse_config(write(tmp_path, """
        [model]
        g1 = 0.01
        g2 = 0.15
        [dissipation]
        gamma2 = 2.5
        [sweep]
        parameter = "g1"
        start = 0.01
        stop = 0.3
        num = 30
        jobs = 4
    """))
    assert isinstance(spec, SweepSpec)
    vals = np.array(spec.axes[0].values)
    assert vals.size == 30 and np.all(np.diff(vals) > 0)
    assert vals[0] == 0.01 and vals[-1] == pytest.approx(0.3)
    assert spec.jobs == 4
    assert [s.params.g1 for s in spec.specs()] == list(vals)


def test_two_axis_sweep_order():
    doc = {
        "model": {"g1": 0.1, "g2": 0.15},
        "sweep": {"axes": [{"parameter": "g1", "values": [0.1, 0.2]}, {"parameter": "r", "values": [0, 0.5, 1]}]},
    }
    pts = spec_from_dict(doc).points()
    assert len(pts) == 6
    assert pts[:2] == [{"g1": 0.1, "r": 0.0}, {"g1": 0.1, "r": 0.5}]


@pytest.mark.parametrize(
    "sweep,field",
    [
        ({"parameter": "g1", "values": [0.1, 0.3, 0.2]}, "sweep.g1"),
        ({"parameter": "g1", "values": [0.1, float("nan")]}, "sweep.values[1]"),
        ({"parameter": "nope", "values": [0.1]}, "sweep.parameter"),
        ({"parameter": "g1b", "values": [0.1]}, "sweep.parameter"),
        ({"values": [0.1]}, "sweep.parameter"),
        ({"parameter": "g1"}, "sweep"),
    ],
)
def test_sweep_validation(sweep, field):
    with pytest.raises(ConfigError) as err:
        spec_from_dict({"model": {"g1": 0.1, "g2": 0.15}, "sweep": sweep})
    assert err.value.field == field


def test_unknown_observable():
    with pytest.raises(ConfigError) as err:
        spec_from_dict({"model": {"g1": 0.1, "g2": 0.15}, "observables": {"list": ["n", "entropy"]}})
    assert err.value.field == "observables"


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"model": {"g1": 0.1}}, "model.g2"),
        ({"model": {"g1": "x", "g2": 0.1}}, "model.g1"),
        ({"model": {"g1": -0.1, "g2": 0.1}}, "model.g1"),
        ({"model": {"g1": 0.1, "g2": 0.1, "spin": 1}}, "model"),
        ({"model": {"g1": 0.1, "g2": 0.1}, "solver": {"cutoff": 2}}, "solver.cutoff"),
        ({"model": {"g1": 0.1, "g2": 0.1}, "solver": {"basis": "odd"}}, "solver.basis"),
        ({"model": {"g1": 0.1, "g2": 0.1}, "solver": {"target_tail": 2.0}}, "solver.target_tail"),
        ({"model": {"g1": 0.1, "g2": 0.1}, "dissipation": {"gamma1": 0.0}}, "dissipation"),
        ({"model": {"g1": 0.1, "g2": 0.1}, "extra": {}}, "config"),
    ],
)
def test_validation_errors_name_field(doc, field):
    with pytest.raises(ConfigError) as err:
        spec_from_dict(doc)
    assert err.value.field == field
    assert str(err.value).startswith(field)


def test_parse_error_has_line_context(tmp_path):
    p = write(tmp_path, """
        [model]
        g1 = 0.2
        g2 = = 0.15
    """)
    with pytest.raises(ConfigError) as err:
        parse_config(p)
    assert "line 4" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.toml")


def test_with_value_and_drive():
    spec = spec_from_dict({"model": {"g1": 0.1, "g2": 0.15}, "drive": {"gd1": 0.01, "phi1": 0.5}})
    assert spec.drive.gd1 == 0.01 and spec.drive.gd2 == 0.0
    assert spec.with_value("gamma2", 3.0).decay.gamma2 == 3.0
    assert spec.with_value("phi1", 1.0).drive.phi1 == 1.0
    with pytest.raises(ConfigError):
        spec.with_value("g1b", 0.1)
