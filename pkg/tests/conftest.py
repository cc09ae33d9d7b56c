import numpy as np
import pytest

from ioaopt import flp, ioa
from ioaopt.scurve import cubic, split


@pytest.fixture(scope="session")
def canonical_curve():
    """z^3 - 15z^2 + 75z on [1, 7], deflection 5; phi(5)=125, phi(7)=133."""
    return cubic(a=1.0, eps=0.0, const=125.0, capacity=7.0, deflection=5.0,
                 lower=1.0)


@pytest.fixture(scope="session")
def canonical_pair(canonical_curve):
    return split(canonical_curve)


@pytest.fixture()
def host_problem(canonical_curve):
    """Two-variable host with the canonical cost term on x1.

    Global optimum -52.875 at (1.5, 4.5).
    """
    return ioa.Problem(
        name="host",
        variables=[ioa.VarSpec("x1", 1.0, 7.0), ioa.VarSpec("x2", 1.0, 7.0)],
        objective={"x2": -30.0},
        constraints=[
            ioa.LinRow({"x1": -9.0, "x2": 5.0}, "<=", 9.0),
            ioa.LinRow({"x1": 1.0, "x2": -6.0}, "<=", 6.0),
            ioa.LinRow({"x1": 3.0, "x2": 1.0}, "<=", 9.0),
        ],
        sterms=[ioa.STerm("x1", canonical_curve)],
    )


@pytest.fixture()
def toy_instance():
    """Two facilities, two customers; cheap facility 0 covers everything."""
    curve = flp.production_curve(1, 1, 200.0, 100.0)
    facs = [
        flp.Facility(fixed_cost=300.0, capacity=200.0, deflection=100.0, curve=curve),
        flp.Facility(fixed_cost=500.0, capacity=200.0, deflection=100.0, curve=curve),
    ]
    return flp.FlpInstance(
        name="toy", facilities=facs, demands=np.array([10.0, 10.0]),
        transport=np.array([[1.0, 3.0], [2.5, 0.5]]),
        ftype=1, structure=1, beta=0.5)
