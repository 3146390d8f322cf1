import pytest

from noisebench.circuits import Topology
from noisebench.qpu import VirtualQPU, synthetic_profile


@pytest.fixture(scope="session")
def line6_profile():
    return synthetic_profile("line6-test", Topology.line(6), seed=77)


@pytest.fixture()
def line6_qpu(line6_profile):
    return VirtualQPU(line6_profile)
