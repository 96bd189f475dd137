import pytest

from kochlab.config import TupleCfg
from kochlab.diophantine import cf_expand
from kochlab.kochergin import KocherginFlow
from kochlab.roof import CompositeRoof, make_singular_roof

TUPLE = tuple(TupleCfg().singularities)
EVEN = (0.1, 0.35, 0.6, 0.85)


@pytest.fixture(scope="session")
def roof():
    return make_singular_roof(1 / 3, 0.1)


@pytest.fixture(scope="session")
def golden():
    return cf_expand("golden", 60)


@pytest.fixture(scope="session")
def flow(roof, golden):
    """Four singularities at the configured good tuple."""
    return KocherginFlow(golden, CompositeRoof(roof, TUPLE))


@pytest.fixture(scope="session")
def even_flow(roof, golden):
    return KocherginFlow(golden, CompositeRoof(roof, EVEN))


@pytest.fixture(scope="session")
def bump_cocycle(flow):
    from kochlab.cocycle import build_bump_cocycle
    return build_bump_cocycle(flow, 0.02)


@pytest.fixture(scope="session")
def analytic_cocycle(flow):
    from kochlab.cocycle import build_analytic_cocycle
    return build_analytic_cocycle(flow, 2)
