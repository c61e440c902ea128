from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from dnlab.forms import random_form
from dnlab.io import load_form, load_kappa
from dnlab.perturbation import SignedPotential, decomposition_threshold, interior_positivity

FIXTURES = Path(str(resources.files("dnlab") / "fixtures"))


def fixture_form(name):
    return load_form(FIXTURES / f"{name}.form.json")


def fixture_kappa(name, form):
    return load_kappa(FIXTURES / f"{name}.kappa.json", form)


def random_kappa(rng, form, scale=1.0, p_zero=0.3):
    """Signed potential with random support; disjoint parts by construction."""
    v = rng.normal(0.0, scale, form.n) * (rng.random(form.n) > p_zero)
    return SignedPotential.from_vector(v)


def nonsingular_instance(rng, **kw):
    while True:
        form = random_form(rng, **kw)
        kappa = random_kappa(rng, form)
        if decomposition_threshold(form, kappa)[0]:
            return form, kappa


def positive_instance(rng, **kw):
    """(form, kappa) whose perturbed interior block is positive definite."""
    while True:
        form = random_form(rng, **kw)
        kappa = random_kappa(rng, form)
        if interior_positivity(form, kappa) and decomposition_threshold(form, kappa)[0]:
            return form, kappa


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def p3():
    return fixture_form("p3")


@pytest.fixture
def s3():
    return fixture_form("s3")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
