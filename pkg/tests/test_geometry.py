"""Transform contracts: round trips, variance encoding, simplex image."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchwalk.errors import DegenerateLevel, NotPositiveDefinite, OffSimplexAffineHull
from patchwalk.geometry import (
    CanonicalSimplex,
    PatchTransform,
    VolatilityEllipsoid,
    build_transform,
    from_patch,
    to_patch,
)

from conftest import rng


def spd(d: int, seed: int, cond: float = 4.0) -> np.ndarray:
    g = rng(seed)
    q, _ = np.linalg.qr(g.standard_normal((d, d)))
    eig = np.exp(np.linspace(0.0, np.log(cond), d))
    return (q * eig[None, :]) @ q.T


def feasible_level(sigma: np.ndarray, frac: float = 0.5) -> float:
    """Level between the hyperplane minimum and the equal-weight variance."""
    d = sigma.shape[0]
    w = np.full(d, 1.0 / d)
    c_eq = float(w @ sigma @ w)
    v_min = 1.0 / float(np.ones(d) @ np.linalg.solve(sigma, np.ones(d)))
    return v_min + frac * (c_eq - v_min) + 0.5 * (c_eq - v_min)


class TestTypes:
    def test_canonical_simplex_definition(self):
        cs = CanonicalSimplex(4)
        assert cs.contains(cs.barycenter())
        assert cs.contains(np.array([1.0, 0, 0, 0]))
        assert not cs.contains(np.array([0.5, 0.5, 0.5, -0.5]))
        assert np.allclose(cs.vertices().sum(axis=1), 1.0)

    def test_ellipsoid_validation(self):
        with pytest.raises(NotPositiveDefinite):
            VolatilityEllipsoid(sigma=np.array([[1.0, 2.0], [2.0, 1.0]]), level=0.1)
        asym = np.array([[1.0, 0.1], [0.0999, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            VolatilityEllipsoid(sigma=asym, level=0.1)
        with pytest.raises(DegenerateLevel):
            VolatilityEllipsoid(sigma=np.eye(2), level=0.0)

    def test_basis_orthonormal(self):
        for d_assets in (3, 5, 12):
            T = build_transform(spd(d_assets, d_assets), feasible_level(spd(d_assets, d_assets)), d_assets)
            B = T.basis
            assert np.allclose(B @ B.T, np.eye(d_assets - 1), atol=1e-10)
            assert np.allclose(B @ np.ones(d_assets), 0.0, atol=1e-12)

    def test_build_deterministic(self):
        sigma = spd(6, 1)
        c = feasible_level(sigma)
        t1, t2 = build_transform(sigma, c, 6), build_transform(sigma, c, 6)
        assert np.array_equal(t1.basis, t2.basis)
        assert np.array_equal(t1.whitening, t2.whitening)
        assert np.array_equal(t1.offset, t2.offset)


class TestBuildTransform:
    def test_identity_tangency_is_degenerate(self):
        # With the identity covariance, the barycenter variance 1/3 equals
        # the hyperplane minimum: the slice is a single point, so the
        # transform must refuse rather than divide by zero.
        with pytest.raises(DegenerateLevel):
            build_transform(np.eye(3), 1.0 / 3.0, 3)

    def test_identity_above_minimum_maps_to_sphere(self):
        T = build_transform(np.eye(3), 0.5, 3)
        x = np.array([0.5, 0.5, 0.0])  # on the budget line with x.x = 0.5
        assert abs(x.sum() - 1.0) < 1e-12 and abs(x @ x - 0.5) < 1e-12
        assert abs(np.linalg.norm(to_patch(x, T)) - 1.0) < 1e-10

    def test_not_positive_definite(self):
        sigma = np.eye(4)
        sigma[3, 3] = 1e-14
        with pytest.raises(NotPositiveDefinite):
            build_transform(sigma, 0.5, 4)

    def test_level_must_be_positive(self):
        with pytest.raises(DegenerateLevel):
            build_transform(np.eye(4), -1.0, 4)

    def test_round_trip_on_random_unit_points(self):
        sigma = spd(5, 7)
        T = build_transform(sigma, feasible_level(sigma), 5)
        g = rng(3)
        y = g.standard_normal((100, 4))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        back = to_patch(from_patch(y, T), T)
        assert np.max(np.abs(back - y)) < 1e-10

    def test_diag_covariance_patch_points_satisfy_contracts(self, sphere_body_3d):
        sigma = np.diag([1.0, 2.0, 3.0])
        w = np.full(3, 1.0 / 3.0)
        c = float(w @ sigma @ w)
        T = build_transform(sigma, c, 3)
        from patchwalk.topology import build_patch
        from patchwalk.walks import sample_component

        body = build_patch(T.simplex, transform=T)
        assert body.M >= 1
        pts = sample_component(body, body.components[0], 1000, rng(11))
        x = from_patch(pts, T)
        var = np.einsum("ij,jk,ik->i", x, sigma, x)
        assert np.max(np.abs(var - c)) < 1e-9
        assert np.max(np.abs(x.sum(axis=1) - 1.0)) < 1e-12


class TestToPatch:
    def test_variance_encoded_in_norm(self):
        # ||y||^2 (c - v_min) + v_min = x' S x on the budget hyperplane; the
        # image is the unit sphere exactly on the target level.
        sigma = spd(6, 2)
        c = feasible_level(sigma)
        T = build_transform(sigma, c, 6)
        g = rng(5)
        x = g.dirichlet(np.ones(6), size=10_000)
        y = to_patch(x, T)
        lhs = np.sum(y * y, axis=1) * (c - T.min_variance) + T.min_variance
        xsx = np.einsum("ij,jk,ik->i", x, sigma, x)
        assert np.max(np.abs(lhs - xsx) / np.abs(xsx)) < 1e-9

    def test_vertex_off_level_has_non_unit_norm(self):
        sigma = spd(4, 3)
        c = feasible_level(sigma)
        T = build_transform(sigma, c, 4)
        e1 = np.zeros(4)
        e1[0] = 1.0
        assert abs(float(e1 @ sigma @ e1) - c) > 1e-6
        assert abs(np.linalg.norm(to_patch(e1, T)) - 1.0) > 1e-6

    def test_off_hull_rejected(self):
        T = build_transform(np.eye(3), 0.5, 3)
        with pytest.raises(OffSimplexAffineHull):
            to_patch(np.array([0.5, 0.5, 0.5]), T)

    def test_simplex_image_half_spaces(self):
        # Weight positivity maps exactly to the half-space system: the i-th
        # weight equals the slack of facet i.
        sigma = spd(5, 9)
        T = build_transform(sigma, feasible_level(sigma), 5)
        g = rng(8)
        x = g.dirichlet(np.ones(5), size=10_000)
        y = to_patch(x, T)
        assert np.max(y @ T.simplex.A.T - T.simplex.b[None, :]) < 1e-9
        # points off the simplex violate the matching facet
        viol = x.copy()
        viol[:, 0] -= 0.2
        viol[:, 1] += 0.2  # keep the budget, break positivity for some rows
        bad = viol[:, 0] < -1e-9
        yv = to_patch(viol[bad], T)
        slack = T.simplex.b[None, :] - yv @ T.simplex.A.T
        assert np.all(slack[:, 0] < 0.0)


class TestFromPatch:
    def test_unit_points_inside_give_long_only_on_level(self, cap_body):
        sigma = spd(4, 12)
        c = feasible_level(sigma)
        T = build_transform(sigma, c, 4)
        from patchwalk.topology import build_patch
        from patchwalk.walks import sample_component

        body = build_patch(T.simplex)
        pts = sample_component(body, body.components[0], 2000, rng(13))
        x = from_patch(pts, T)
        assert np.min(x) >= -1e-12
        assert np.max(np.abs(x.sum(axis=1) - 1.0)) < 1e-9
        var = np.einsum("ij,jk,ik->i", x, sigma, x)
        assert np.max(np.abs(var - c)) < 1e-8

    def test_point_outside_simplex_flags_negative_weight(self):
        sigma = spd(4, 14)
        T = build_transform(sigma, feasible_level(sigma), 4)
        # walk outward through facet 0 from the body
        from patchwalk.topology import vertices_of

        verts = vertices_of(T.simplex)
        outside = verts[0] * 1.5 - 0.25 * verts[1:].mean(axis=0)
        assert not T.simplex.contains(outside)
        x = from_patch(outside, T)
        assert np.min(x) < 0.0
        assert abs(x.sum() - 1.0) < 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(3, 8))
def test_round_trip_property(seed, d):
    sigma = spd(d, seed % 997 + 1)
    c = feasible_level(sigma)
    T = build_transform(sigma, c, d)
    g = rng(seed)
    x = g.dirichlet(np.ones(d), size=50)
    assert np.max(np.abs(from_patch(to_patch(x, T), T) - x)) < 1e-10
    y = g.standard_normal((50, d - 1))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    assert np.max(np.abs(to_patch(from_patch(y, T), T) - y)) < 1e-10


def test_json_round_trip():
    sigma = spd(5, 21)
    c = feasible_level(sigma)
    T = build_transform(sigma, c, 5)
    T2 = PatchTransform.from_json(T.to_json())
    assert np.allclose(T2.basis, T.basis)
    assert np.allclose(T2.whitening, T.whitening)
    assert T2.level == T.level
    g = rng(2)
    x = g.dirichlet(np.ones(5), size=20)
    assert np.allclose(to_patch(x, T2), to_patch(x, T), atol=1e-12)
    doc = json.loads(T.to_json())
    assert set(doc) == {"basis", "offset", "whitening", "level", "min_variance"}
