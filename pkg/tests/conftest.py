"""Shared contracts and frozen oracle values.

Oracle values were computed independently of the package: closed forms of
the constant-coefficient Thiele equation evaluated in plain Python, and
scipy DOP853 integrations (rtol 1e-13) of hand-written ODE systems.
"""

import pytest

from lifereserve import load_fixture
from lifereserve.model import load_contract

# closed forms, mu = 0.01, sigma = 0.05, delta = 0.03, T = 10
TERM_V0 = 0.08241998849109017
ENDOWMENT_V0 = 0.6703200460356393
SURRENDER_V0 = 0.08052707741738371  # kappa = 0.1
FORFEIT_V0 = 0.06593670447326677  # kappa = 1
DEATH_PROBABILITY = 0.09516258196404048  # 1 - exp(-0.1)

# scipy oracles
PIECEWISE_TERM_V0 = 0.11775835231298795  # mu 0.01 on [0, 5), 0.02 on [5, 10]
DISABILITY_MARKOV_V0 = (0.5862942386261925, 6.149734428765785)  # active, disabled
SWITCHING_V0 = (0.47038412474473834, 0.48564395121406656)  # premium, paid_up

# free policy: frozen premium-mode reserve
FREE_POLICY_V0 = -0.0805270774


@pytest.fixture(scope="session")
def term():
    return load_fixture("term_insurance")


@pytest.fixture(scope="session")
def endowment():
    return load_fixture("pure_endowment")


@pytest.fixture(scope="session")
def surrender():
    return load_fixture("surrender")


@pytest.fixture(scope="session")
def free_policy():
    return load_fixture("free_policy")


@pytest.fixture(scope="session")
def switching():
    return load_fixture("switching")


@pytest.fixture(scope="session")
def disability():
    return load_fixture("disability")


def contract(text: str):
    return load_contract(text)


ZERO_PAYMENTS = """
horizon: 10
states: {labels: [alive, dead]}
intensities: [{from_state: alive, to_state: dead, value: 0.01}]
discount: 0.03
"""

NO_JUMPS = """
horizon: 10
states: {labels: [alive, dead]}
intensities: [{from_state: alive, to_state: dead, value: 0.0}]
payments: {transitions: [{from_state: alive, to_state: dead, value: 1.0}]}
discount: 0.03
"""

PIECEWISE_TERM = """
horizon: 10
states: {labels: [alive, dead]}
intensities: [{from_state: alive, to_state: dead, breakpoints: [5], values: [0.01, 0.02]}]
payments: {transitions: [{from_state: alive, to_state: dead, value: 1.0}]}
discount: 0.03
"""

DISABILITY_MARKOV = """
kind: semi_markov
horizon: 10
states: {labels: [active, disabled, dead]}
intensities:
  - {from_state: active, to_state: disabled, value: 0.02}
  - {from_state: active, to_state: dead, value: 0.01}
  - {from_state: disabled, to_state: active, value: 0.05}
  - {from_state: disabled, to_state: dead, value: 0.03}
payments: {sojourn: [{state: disabled, value: 1.0}]}
discount: 0.03
"""
