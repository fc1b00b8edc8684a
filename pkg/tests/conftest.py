import numpy as np
import pytest

from iphs_opt.core import Box, CostWeights
from iphs_opt.models import ControlVariant, heat_exchanger_model, quadratic_model
from iphs_opt.ocp import OcpSpec, TerminalPoint

LN2 = np.log(2.0)
LN20 = np.log(20.0)


@pytest.fixture(scope="session")
def hx():
    return heat_exchanger_model()


@pytest.fixture(scope="session")
def hx_thermostat():
    return heat_exchanger_model(variant=ControlVariant.THERMOSTAT)


@pytest.fixture(scope="session")
def quad():
    return quadratic_model()


def transition_spec(model, t_f, weights=None):
    """Heat the exchanger from T = (1, 1) to T = (20, 20) with |u| <= 10."""
    return OcpSpec(
        model=model,
        x0=np.zeros(2),
        terminal=TerminalPoint(np.full(2, LN20)),
        t_f=t_f,
        control_box=Box(np.array([-10.0]), np.array([10.0])),
        weights=weights if weights is not None else CostWeights.entropy(),
    )


@pytest.fixture(scope="session")
def spec5(hx):
    return transition_spec(hx, 5.0)
