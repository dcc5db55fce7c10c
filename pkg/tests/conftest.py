from __future__ import annotations

import pytest

from branchleak.profiles import default_profiles
from branchleak.script import ChoicePoint, ScriptGraph, Segment, binary_chain
from branchleak.simulate import SideChannelModel


@pytest.fixture(scope="session")
def two_question_graph() -> ScriptGraph:
    """Rejoining two-question graph: both branches of q1 lead to q2."""
    return binary_chain(2, duration_ms=2000, chunk_ms=250)


@pytest.fixture(scope="session")
def partial_two_question_graph() -> ScriptGraph:
    """Two choice points only: q2 is asked after the default branch of q1.

    Picking the alternate at q1 ends the session, so this graph has
    three paths, not four.
    """
    segments = {
        "s0": Segment("s0", 2000, 250),
        "s1": Segment("s1", 2000, 250),
        "s1x": Segment("s1x", 2500, 250),
        "s2": Segment("s2", 2000, 250),
        "s2x": Segment("s2x", 2500, 250),
    }
    choices = {
        "s0": ChoicePoint("q1", "s0", "s1", "s1x"),
        "s1": ChoicePoint("q2", "s1", "s2", "s2x"),
    }
    return ScriptGraph(entry="s0", segments=segments, choices=choices)


@pytest.fixture(scope="session")
def default_model() -> SideChannelModel:
    return SideChannelModel()


@pytest.fixture(scope="session")
def clean_model() -> SideChannelModel:
    return SideChannelModel().noiseless()


@pytest.fixture(scope="session")
def profile():
    return default_profiles()[0]
