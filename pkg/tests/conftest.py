"""Shared corpus graphs used across the test suite."""

from __future__ import annotations

import pytest

from kgraphkit import make_bouquet, make_cycle, make_omega, validate_presentation


def flip_presentation() -> dict:
    """Single-vertex 2-graph where the red edge flips blue letters."""
    return {
        "rank": 2,
        "vertices": ["v"],
        "edges": [
            {"name": "a", "color": 1, "range": "v", "source": "v"},
            {"name": "b", "color": 1, "range": "v", "source": "v"},
            {"name": "f", "color": 2, "range": "v", "source": "v"},
        ],
        "squares": [
            {"top": ["a", "f"], "bottom": ["f", "b"]},
            {"top": ["b", "f"], "bottom": ["f", "a"]},
        ],
    }


@pytest.fixture(scope="session")
def c3():
    return make_cycle(3)


@pytest.fixture(scope="session")
def bouquet2():
    return make_bouquet(2)


@pytest.fixture(scope="session")
def flip():
    return validate_presentation(flip_presentation())


@pytest.fixture(scope="session")
def omega22():
    return make_omega(2, (2, 2))


@pytest.fixture(scope="session")
def omega222():
    return make_omega(3, (2, 2, 2))


@pytest.fixture(scope="session")
def corpus(c3, bouquet2, flip, omega22, omega222):
    return {"c3": c3, "bouquet2": bouquet2, "flip": flip,
            "omega22": omega22, "omega222": omega222}
