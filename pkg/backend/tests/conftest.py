"""
Shared instances for the simulator tests

Parameters are overridden so that the inequalities hold on these small trees
(the 1/n-based defaults only satisfy δ ≥ 4γ from n ≥ 40 on).
"""
import pytest

from services.instance_io import parse_instance

STAR_HEADER = """\
hst 20
node r - 1
node a r 0
node b r 0
k 1
param delta_prime 0.3
param delta 0.01
param gamma 0.002
"""

TWO_LEVEL_HEADER = """\
hst 20
node r - 2
node x r 1
node y r 1
node a x 0
node b x 0
node c y 0
node d y 0
k 1
param delta_prime 0.5
param delta 0.02
param gamma 0.002
"""


def star_text(*requests: str) -> str:
    """Star with two real leaves (n = 5 once the two dummies are attached)"""
    return STAR_HEADER + "".join(f"request {line}\n" for line in requests)


def two_level_text(*requests: str) -> str:
    """Height-2 tree with two leaves per branch (n = 11 with dummy chains, Δ = 21)"""
    return TWO_LEVEL_HEADER + "".join(f"request {line}\n" for line in requests)


@pytest.fixture
def star_kserver():
    return parse_instance(star_text("a 1 2", "b 3 4", "a 5 6"))


@pytest.fixture
def star_tw():
    return parse_instance(star_text("a 1 4", "b 2 3"))


@pytest.fixture
def two_level_kserver():
    return parse_instance(two_level_text("a 1 2", "c 3 4"))
