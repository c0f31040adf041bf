import pytest

from branchrate.asymptotics import optimize_simple_rule
from branchrate.hs import generate_catalog, optimize_catalog_gammas
from branchrate.vc import build_recurrence, tune_config


def pytest_addoption(parser):
    parser.addoption("--tier", choices=("default", "full"), default="default",
                     help="'full' also runs the hours-scale checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--tier") == "full":
        return
    skip = pytest.mark.skip(reason="needs --tier=full")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def tier(request):
    return request.config.getoption("--tier")


@pytest.fixture(scope="session")
def vc3_gamma():
    return optimize_simple_rule(1, 3, 0, 0, 1.5).gamma_star[0]


@pytest.fixture(scope="session")
def tuned_results():
    return {algo: tune_config(algo, 1.5) for algo in ("vc3", "vc3star", "enhanced_vc3star", "better_vc")}


@pytest.fixture(scope="session")
def tuned_vc(tuned_results):
    """Configurations at alpha=1.5 for every VC algorithm, with their recurrences."""
    return {algo: (t.config, build_recurrence(algo, t.config)) for algo, t in tuned_results.items()}


@pytest.fixture(scope="session")
def catalog3():
    return optimize_catalog_gammas(generate_catalog(3), 2.0).catalog
