import os

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from annkh.annulus_core import closure, parse_word
from annkh.tqft import build_complex

settings.register_profile("annkh", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "annkh"))


@st.composite
def braid_words(draw, max_strands=4, max_crossings=6, min_strands=1):
    strands = draw(st.integers(min_strands, max_strands))
    if strands == 1:
        return "", 1
    gens = st.integers(1, strands - 1).flatmap(lambda i: st.sampled_from((i, -i)))
    toks = draw(st.lists(gens, max_size=max_crossings))
    return " ".join(map(str, toks)), strands


def complex_of(text, strands):
    return build_complex(closure(parse_word(text, strands)))


@pytest.fixture
def cx():
    return complex_of


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
