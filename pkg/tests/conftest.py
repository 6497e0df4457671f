import pytest

from transience.ems import EMS4, EMS5, EmsParams, build_ems

from helpers import ACCEPTANCE, load


@pytest.fixture
def toy1():
    return load("toy1.json")


@pytest.fixture
def cyc3():
    return load("cyc3.json")


@pytest.fixture
def ems5_params():
    return EmsParams(**EMS5)


@pytest.fixture
def ems5(ems5_params):
    return build_ems(ems5_params)[0]


@pytest.fixture
def ems4():
    return build_ems(EmsParams(**EMS4))[0]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
