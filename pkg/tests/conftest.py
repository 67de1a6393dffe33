"""Shared fixtures: fixed test bodies and seeded generators."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patchwalk.topology import SimplexH, build_patch, simplex_from_vertices


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def ball_containing_simplex(d: int, scale: float = 3.0) -> SimplexH:
    """Regular-ish simplex containing the unit ball: whole-sphere body."""
    A = np.vstack([np.eye(d), -np.ones((1, d))])
    b = np.full(d + 1, scale)
    return SimplexH(A, b)


def cap_body_3d():
    """Single cap-like component in R^3 (vertex poking out along +x)."""
    V = np.array([[3.0, 0, 0], [-0.4, 2.0, 0], [-0.4, -1.0, 1.6], [-0.4, -1.0, -1.6]])
    return build_patch(simplex_from_vertices(V))


def two_cap_body_3d():
    """Mirror-symmetric body with two components along the x axis."""
    V = np.array([[3.0, 0, 0], [-3.0, 0, 0], [0.0, 0.9, 0], [0.0, 0, 0.9]])
    return build_patch(simplex_from_vertices(V))


def random_simplex(d: int, generator: np.random.Generator, spread: float = 1.6) -> SimplexH:
    """Random non-degenerate simplex whose body is usually non-empty.

    Vertices are drawn around the origin at radii straddling 1 so the
    sphere tends to enter and leave the simplex.
    """
    while True:
        verts = generator.standard_normal((d + 1, d))
        radii = generator.uniform(0.3, spread, size=d + 1)
        verts = verts / np.linalg.norm(verts, axis=1, keepdims=True) * radii[:, None]
        try:
            simplex = simplex_from_vertices(verts)
        except Exception:
            continue
        return simplex


def random_nonempty_body(d: int, generator: np.random.Generator, min_fraction: float = 0.005):
    """Random body with at least one component and a decently sized patch."""
    from oracles import membership_fraction

    while True:
        simplex = random_simplex(d, generator)
        body = build_patch(simplex)
        if body.M == 0:
            continue
        frac = membership_fraction(simplex.A, simplex.b, 200_000, generator)
        if frac >= min_fraction:
            return body


@pytest.fixture(scope="session")
def sphere_body_3d():
    return build_patch(ball_containing_simplex(3))


@pytest.fixture(scope="session")
def cap_body():
    return cap_body_3d()


@pytest.fixture(scope="session")
def two_cap_body():
    return two_cap_body_3d()
