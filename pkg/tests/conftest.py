"""Shared fixtures: the standard tool pool, its similarity scores, and the
tool groups they cluster into."""

from __future__ import annotations

import pytest

import pipeline_fixtures as pf


@pytest.fixture(scope="session")
def pool():
    return pf.fixture_pool()


@pytest.fixture(scope="session")
def scores():
    return pf.fixture_scores()


@pytest.fixture(scope="session")
def groups(pool, scores):
    return pf.fixture_groups(pool, scores)
