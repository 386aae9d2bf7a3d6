from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from treethin.treekit import TreeSpec, binary_spec, build_tree

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def binary():
    """Binary tree (root 3 children, others 2) by depth, built once per session."""
    cache = {}

    def get(depth):
        if depth not in cache:
            cache[depth] = build_tree(binary_spec(depth))
        return cache[depth]
    return get


def small_specs(max_depth=4):
    regular = st.builds(lambda r, c, d: TreeSpec(kind="regular", depth=d, root_children=r, children=c),
                        st.integers(1, 4), st.integers(1, 3), st.integers(0, max_depth))
    by_level = st.builds(
        lambda r, cpl, d: TreeSpec(kind="by_level", depth=d, root_children=r, children_per_level=tuple(cpl)),
        st.integers(1, 4), st.lists(st.integers(1, 3), min_size=1, max_size=4), st.integers(0, max_depth))
    rand = st.builds(
        lambda r, lo, extra, d, s: TreeSpec(kind="seeded_random", depth=d, root_children=r,
                                            d_min_children=lo, d_max_children=lo + extra, seed=s),
        st.integers(1, 4), st.integers(1, 2), st.integers(0, 1), st.integers(0, max_depth),
        st.integers(0, 2 ** 64 - 1))
    return st.one_of(regular, by_level, rand)


probabilities = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(49, 50),
                             max_denominator=50)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Time an acceptance criterion and record one PASS/FAIL line for it."""
    import time

    class Recorder:
        def __init__(self):
            self.start = time.perf_counter()
            self.detail = ""

        @property
        def elapsed(self):
            return time.perf_counter() - self.start

    rec = Recorder()
    yield rec
    failed = getattr(request.node, "rep_call", None)
    status = "FAIL" if failed is None or failed.failed else "PASS"
    line = f"{status} {request.node.name}: {rec.detail} [{rec.elapsed:.2f}s]"
    _ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
