import pytest

from diffusion_auction import fileformat, fixture_path, kernels
from diffusion_auction.network import truthful_profile

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    kernels.warmup()


@pytest.fixture(scope="session")
def fig():
    """The bundled example network, its truthful profile and a label -> id map."""
    net, _ = fileformat.loads(fixture_path("figure1").read_text())
    ids = {net.label(i): i for i in net.buyers}
    return net, truthful_profile(net), ids


def names(net, ids):
    return {net.label(i) for i in ids}
