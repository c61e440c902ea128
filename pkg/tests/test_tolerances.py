import pytest

from dnlab.tolerances import DEFAULTS, resolve


def test_defaults_unchanged_without_overrides():
    assert resolve(environ={}) == DEFAULTS


def test_environment_then_explicit_override():
    tol = resolve({"markov_rel": 1e-6}, environ={"DN_TOL_MARKOV_REL": "1e-8", "DN_TOL_MC_SIGMAS": "4"})
    assert tol["markov_rel"] == 1e-6 and tol["mc_sigmas"] == 4.0


@pytest.mark.parametrize("bad", [{"nope": 1.0}, {"markov_rel": 0.0}])
def test_invalid_overrides(bad):
    with pytest.raises((KeyError, ValueError)):
        resolve(bad, environ={})
