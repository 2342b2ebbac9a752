import pytest

from stratclass.config import (DEFAULTS, build_config, format_config, load_config, load_config_file,
                               parse_text)
from stratclass.errors import ConfigError
from stratclass.response import GRADIENT, LAGRANGIAN


def test_parse_types_and_comments():
    v = parse_text("""
        # a comment
        seed = 7          # trailing comment
        data.sigma = 0.5
        data.mean_neg = -1, 0.5
        figure.enabled = no
        model.hidden = 4, 4, 2
    """)
    assert v == {"seed": 7, "data.sigma": 0.5, "data.mean_neg": (-1.0, 0.5), "figure.enabled": False,
                 "model.hidden": (4, 4, 2)}


@pytest.mark.parametrize("text,fragment", [
    ("bogus.key = 1", "bogus.key: unknown"),
    ("seed = abc", "seed: cannot parse"),
    ("just words", "expected 'key = value'"),
    ("= 3", "empty key"),
])
def test_parse_errors_name_line_and_key(text, fragment):
    with pytest.raises(ConfigError) as e:
        parse_text("seed = 1\n" + text, "exp.cfg")
    assert "exp.cfg:2" in str(e.value) and fragment in str(e.value)


def test_experiment_defaults_and_overrides():
    c = build_config({"experiment": "moons-mlp"})
    assert c.values["loss"] == "cross-entropy" and c.regd.regd_rounds == 80
    assert c.train_response[LAGRANGIAN].tol == 1e-6
    assert c.response[LAGRANGIAN].tol == DEFAULTS["response.tol"]
    c = build_config({"experiment": "moons-mlp", "regd.rounds": 3, "response.lagrangian.step_z": 0.01})
    assert c.regd.regd_rounds == 3
    assert c.response[LAGRANGIAN].step_z == 0.01 and c.response[GRADIENT].step_z == DEFAULTS["response.step_z"]


def test_credit_disables_figures():
    assert build_config({"experiment": "credit-grid"}).figure is None


def test_figure_auto_limits():
    assert build_config().figure_auto
    c = build_config({"figure.xlim": (-1.0, 1.0), "figure.ylim": (-2.0, 2.0)})
    assert not c.figure_auto and c.figure.xlim == (-1.0, 1.0)


@pytest.mark.parametrize("over,key", [
    ({"experiment": "nope"}, "experiment"),
    ({"data.sigma": 0.0}, "data.sigma"),
    ({"model.family": "cnn"}, "model.family"),
    ({"loss": "l1"}, "loss"),
    ({"erm.lr": -1.0}, "erm.lr"),
    ({"regd.rounds": 0}, "regd.rounds"),
    ({"response.lagrangian.step_z": 0.0}, "response.lagrangian.step_z"),
    ({"regd.response.eps": -1.0}, "regd.response.eps"),
    ({"figure.resolution": (1, 5)}, "figure.resolution"),
    ({"cost.kind": "l1"}, "cost.kind"),
])
def test_validation_names_key(over, key):
    with pytest.raises(ConfigError, match=f"^{key}:"):
        build_config(over)


def test_seed_and_out_override(tmp_path):
    p = tmp_path / "e.cfg"
    p.write_text("experiment = gaussians-linear\nseed = 3\nout = a\n")
    c = load_config(p)
    assert (c.seed, c.out) == (3, "a")
    c = load_config(p, seed=2**64 - 1, out="b")
    assert (c.seed, c.out) == (2**64 - 1, "b")
    with pytest.raises(ConfigError, match="not found"):
        load_config_file(tmp_path / "missing.cfg")


def test_format_round_trip():
    v = build_config({"experiment": "moons-mlp"}).values
    assert parse_text(format_config(v)) == v
