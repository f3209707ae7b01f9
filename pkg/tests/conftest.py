import os
import sys

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_log  # noqa: E402
from nmifc.lattice import CONF, INTEG, Atom, Bot, Conj, Disj, Join, Meet, Projection, Top  # noqa: E402

settings.register_profile(
    "default", max_examples=200, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def principals(atoms=("a", "b", "c"), max_leaves=6):
    leaf = st.one_of(st.sampled_from([Atom(a) for a in atoms]), st.just(Top()), st.just(Bot()))

    def extend(inner):
        return st.one_of(
            st.builds(Projection, inner, st.sampled_from((CONF, INTEG))),
            st.builds(Conj, inner, inner),
            st.builds(Disj, inner, inner),
            st.builds(Join, inner, inner),
            st.builds(Meet, inner, inner),
        )

    return st.recursive(leaf, extend, max_leaves=max_leaves)


def pytest_terminal_summary(terminalreporter):
    lines = acceptance_log.LINES
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
