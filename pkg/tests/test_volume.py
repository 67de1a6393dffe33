"""Annealing-scheme checks against closed forms and rejection oracles."""
import math

import numpy as np
import pytest

from patchwalk.errors import DegenerateMean, EmptyIntersection, ScheduleStall
from patchwalk.topology import SimplexH, build_patch
from patchwalk.volume import (
    AnnealingParams,
    VmfFunction,
    choose_mu,
    estimate_volume,
    first_alpha,
    hoeffding_trials,
    log_sphere_vmf_integral,
    next_alpha,
    ratio_estimate,
    relative_volumes,
    sphere_area,
    stop_check,
    vmf_exact_sample,
)
from patchwalk.walks import Chain, estimate_tau

from conftest import ball_containing_simplex, rng
from oracles import (
    membership_fraction,
    sphere_area_ref,
    vmf_cos_mass_above,
    vmf_mean_resultant,
)


def hemisphere_body():
    from patchwalk.topology import simplex_from_vertices

    V = np.array([[12.0, 0, 0], [-12.0, 12, 0], [-12.0, -12, 0], [0.0, 0, -12]])
    return build_patch(simplex_from_vertices(V))


def arc_body(phi: float):
    """Circle arc of angle phi in d=2 (facet x0 <= -cos(phi/2) plus far walls)."""
    A = np.array([[1.0, 0.0], [-1.0, 3.0], [-1.0, -3.0]])
    b = np.array([-math.cos(phi / 2.0), 30.0, 30.0])
    return build_patch(SimplexH(A, b))


class TestVmfSampler:
    def test_zero_concentration_uniform(self):
        mu = np.array([0.0, 0.0, 1.0])
        x = vmf_exact_sample(mu, 0.0, rng(1), 100_000)
        assert np.linalg.norm(x.mean(axis=0)) < 0.02

    def test_mean_direction_alignment(self):
        mu = np.zeros(5)
        mu[2] = 1.0
        x = vmf_exact_sample(mu, 50.0, rng(2), 100_000)
        m = x.mean(axis=0)
        assert m @ mu / np.linalg.norm(m) > 0.99

    def test_bessel_ratio(self):
        for d, alpha in ((3, 10.0), (5, 1.0), (10, 50.0)):
            mu = np.zeros(d)
            mu[0] = 1.0
            x = vmf_exact_sample(mu, alpha, rng(3), 100_000)
            emp = float(np.linalg.norm(x.mean(axis=0)))
            ref = vmf_mean_resultant(d, alpha)
            assert abs(emp - ref) / ref < 0.01

    def test_extreme_concentration_stable(self):
        mu = np.zeros(4)
        mu[0] = 1.0
        x = vmf_exact_sample(mu, 1e12, rng(4), 100)
        assert np.all(np.isfinite(x))
        assert np.min(x @ mu) > 1.0 - 1e-10


class TestVmfFunction:
    def test_validation(self):
        with pytest.raises(ValueError):
            VmfFunction(mu=np.array([1.0, 1.0]), alpha=1.0)
        with pytest.raises(ValueError):
            VmfFunction(mu=np.array([1.0, 0.0]), alpha=-1.0)
        f = VmfFunction(mu=np.array([1.0, 0.0]), alpha=0.0)
        assert np.allclose(f(np.array([[0.0, 1.0]])), 1.0)

    def test_sphere_integral_closed_form(self):
        # quadrature oracle over the cosine marginal
        for d, alpha in ((3, 2.0), (5, 17.0), (8, 0.5)):
            nodes, weights = np.polynomial.legendre.leggauss(400)
            dens = np.exp(alpha * nodes) * np.power(1 - nodes**2, 0.5 * (d - 3))
            sub_area = sphere_area_ref(d - 1)
            oracle = sub_area * float(weights @ dens)
            assert math.exp(log_sphere_vmf_integral(alpha, d)) == pytest.approx(
                oracle, rel=1e-8
            )
        assert math.exp(log_sphere_vmf_integral(0.0, 4)) == pytest.approx(
            sphere_area_ref(4), rel=1e-12
        )


class TestChooseMu:
    def test_cap_axis(self):
        A = np.array([[-1.0, 0, 0], [0.3, 1.0, 0], [0.3, -1.0, 1.0], [0.3, -1.0, -1.0]])
        b = np.array([-0.6, 8.0, 8.0, 8.0])
        body = build_patch(SimplexH(A, b))
        from patchwalk.walks import sample_component

        pts = sample_component(body, body.components[0], 4000, rng(5), burn_in=100)
        mu = choose_mu(pts)
        assert abs(np.linalg.norm(mu) - 1.0) < 1e-12
        assert mu[0] > 0.99  # cap axis is +x

    def test_degenerate_mean(self):
        pts = np.vstack([np.eye(3), -np.eye(3)] * 40)
        with pytest.raises(DegenerateMean):
            choose_mu(pts)

    def test_needs_history(self):
        with pytest.raises(ValueError):
            choose_mu(np.eye(3))


class TestSchedule:
    def test_ratio_at_zero_is_one(self):
        t = rng(6).uniform(-1.0, 1.0, 500)
        assert np.mean(np.exp(0.0 * t)) == 1.0

    def test_first_alpha_deterministic(self):
        t = rng(7).uniform(0.2, 0.9, 1000)
        assert first_alpha(t) == first_alpha(t)

    def test_first_alpha_matches_grid_scan(self):
        # dense scan of the same variance-window curve on hemisphere samples
        body = hemisphere_body()
        from patchwalk.walks import sample_component

        pts = sample_component(body, body.components[0], 1500, rng(8), burn_in=100)
        mu = choose_mu(pts)
        t = pts @ mu
        a_search = first_alpha(t)
        grid = np.linspace(1e-3, 4 * a_search, 4000)
        from patchwalk.volume import _variance_ok

        ok = np.array([_variance_ok(a, t) for a in grid])
        a_grid = grid[np.where(ok)[0][-1]]
        assert abs(a_search - a_grid) <= 2 * (grid[1] - grid[0]) + 1e-3 * a_search

    def test_next_alpha_strictly_increasing(self):
        g = rng(9)
        t = g.uniform(0.4, 1.0, 2000)
        alpha = first_alpha(t)
        for d in (3, 6):
            nxt = next_alpha(alpha, t, d)
            assert nxt > alpha

    def test_schedule_identity_at_zero_exponent(self):
        # the schedule map alpha * (1 + 1/d)^r is the identity at r = 0
        assert 3.7 * (1 + 1 / 5) ** 0 == 3.7

    def test_schedule_stall(self):
        t = np.concatenate([np.full(500, -1.0), np.full(500, 1.0)])
        with pytest.raises(ScheduleStall):
            next_alpha(1e13, t, 3, alpha_cap=1e14)


class TestStopCheck:
    def test_whole_sphere_always_true(self, sphere_body_3d):
        comp = sphere_body_3d.components[0]
        mu = comp.starting_point
        for alpha in (0.0, 1.0, 50.0):
            assert stop_check(sphere_body_3d, comp, mu, alpha, rng(10))

    def test_hemisphere_transitions(self):
        body = hemisphere_body()
        comp = body.components[0]
        mu = np.array([0.0, 0.0, -1.0])  # pole of the lower hemisphere
        lo_hits = sum(stop_check(body, comp, mu, 0.05, rng(100 + i)) for i in range(10))
        hi_hits = sum(stop_check(body, comp, mu, 400.0, rng(200 + i)) for i in range(10))
        assert lo_hits == 0
        assert hi_hits == 10

    def test_trial_count_formula(self):
        assert hoeffding_trials(0.05, 0.05) == math.ceil(math.log(1 / 0.95) / 0.05**2)
        assert hoeffding_trials(0.05, 0.05) == 21

    def test_monotone_in_alpha_on_hemisphere(self):
        body = hemisphere_body()
        comp = body.components[0]
        mu = np.array([0.0, 0.0, -1.0])
        # majority verdict per alpha over repeated draws
        rates = []
        for alpha in (1.0, 30.0, 120.0, 700.0):
            rates.append(
                np.mean([stop_check(body, comp, mu, alpha, rng(50 + 7 * i)) for i in range(12)])
            )
        assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))


class TestRatioEstimate:
    def test_equal_functions_give_unit_ratio(self):
        g = rng(11)
        calls = {"n": 0}

        def draw(n):
            calls["n"] += n
            return g.uniform(-1, 1, n)

        log_r, used = ratio_estimate(draw, 0.0, window=200, eps_k=0.05)
        assert log_r == 0.0
        assert used >= 200

    def test_whole_sphere_bessel_oracle(self, sphere_body_3d):
        comp = sphere_body_3d.components[0]
        s = sphere_body_3d.simplex
        g = rng(12)
        mu = np.array([0.0, 0.0, 1.0])
        a0, a1 = 1.0, 2.5
        eps_k = 0.05
        chain = Chain(s, comp.starting_point, g)
        chain.vmf_steps(200, mu, a0)

        def draw(n):
            return chain.vmf_steps(n, mu, a0) @ mu

        log_r, _ = ratio_estimate(draw, a1 - a0, window=536, eps_k=eps_k)
        truth = log_sphere_vmf_integral(a1, 3) - log_sphere_vmf_integral(a0, 3)
        assert math.exp(log_r) == pytest.approx(math.exp(truth), rel=2 * eps_k)
        assert math.exp(log_r) > 0.0


class TestEstimateVolume:
    def test_whole_sphere_area(self, sphere_body_3d):
        est = estimate_volume(sphere_body_3d, sphere_body_3d.components[0], 0.1, rng(13))
        assert est.volume == pytest.approx(sphere_area(3), rel=0.1)
        assert est.volume <= sphere_area(3) + 1e-12
        assert est.phases == 0  # stop rule already satisfied at alpha = 0

    @pytest.mark.parametrize("phi", [math.pi / 6, math.pi / 2, math.pi])
    def test_arc_lengths(self, phi):
        body = arc_body(phi)
        est = estimate_volume(body, body.components[0], 0.1, rng(14))
        assert est.volume == pytest.approx(phi, rel=0.1)

    def test_hemisphere(self):
        body = hemisphere_body()
        est = estimate_volume(body, body.components[0], 0.1, rng(15))
        assert est.volume == pytest.approx(sphere_area(3) / 2.0, rel=0.1)
        assert 0.0 < est.volume <= sphere_area(3)
        assert np.all(np.diff(est.schedule) > 0.0)
        assert est.phases <= 60

    def test_rejection_oracle_3d(self, cap_body):
        s = cap_body.simplex
        frac = membership_fraction(s.A, s.b, 2_000_000, rng(16))
        truth = frac * sphere_area(3)
        est = estimate_volume(cap_body, cap_body.components[0], 0.1, rng(17))
        assert est.volume == pytest.approx(truth, rel=0.1)

    def test_eps_scaling_trend(self):
        # halving the budget should reduce observed error on the analytic arc
        body = arc_body(math.pi / 2)
        errs = {0.4: [], 0.1: []}
        for eps in errs:
            for seed in range(20):
                est = estimate_volume(body, body.components[0], eps, rng(300 + seed))
                errs[eps].append(abs(est.volume - math.pi / 2) / (math.pi / 2))
        assert np.mean(errs[0.1]) < np.mean(errs[0.4])

    def test_telescoping_consistency_whole_sphere(self, sphere_body_3d):
        # manual 2-phase schedule on the whole sphere must reproduce the area
        comp = sphere_body_3d.components[0]
        s = sphere_body_3d.simplex
        g = rng(18)
        mu = np.array([1.0, 0.0, 0.0])
        alphas = [0.0, 1.5, 3.0]
        log_ratios = []
        tau = estimate_tau(comp, s, g)
        chain = Chain(s, comp.starting_point, g)
        for a_prev, a_next in zip(alphas, alphas[1:]):
            if a_prev == 0.0:
                draw = lambda n: chain.reflective_steps(n, tau, 300) @ mu
            else:
                draw = lambda n: chain.vmf_steps(n, mu, a_prev) @ mu
            log_r, _ = ratio_estimate(draw, a_next - a_prev, window=536, eps_k=0.05)
            log_ratios.append(log_r)
        log_vol = log_sphere_vmf_integral(alphas[-1], 3) - sum(log_ratios)
        assert math.exp(log_vol) == pytest.approx(sphere_area(3), rel=0.1)


class TestRelativeVolumes:
    def test_single_component(self, cap_body):
        w = relative_volumes(cap_body, 0.1, rng(19))
        assert np.array_equal(w, [1.0])
        assert cap_body.components[0].relative_volume == 1.0

    def test_symmetric_two_caps(self, two_cap_body):
        w = relative_volumes(two_cap_body, 0.1, rng(20))
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert abs(w[0] - 0.5) < 0.05

    def test_mirror_equivariance(self, two_cap_body):
        # mirroring the body along the split axis swaps the labels/weights
        s = two_cap_body.simplex
        mirrored = SimplexH(s.A * np.array([-1.0, 1.0, 1.0])[None, :], s.b)
        body_m = build_patch(mirrored)
        w = relative_volumes(two_cap_body, 0.1, rng(21))
        w_m = relative_volumes(body_m, 0.1, rng(21))
        assert abs(w.sum() - 1.0) < 1e-12 and abs(w_m.sum() - 1.0) < 1e-12
        assert abs(w[0] - w_m[1]) < 0.08 and abs(w[1] - w_m[0]) < 0.08

    def test_empty_body(self):
        empty = build_patch(
            SimplexH(np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]), np.array([0.05, 0.05, 0.11]))
        )
        with pytest.raises(EmptyIntersection):
            relative_volumes(empty, 0.1, rng(22))

    def test_threads_match_serial(self, two_cap_body):
        w1 = relative_volumes(two_cap_body, 0.2, rng(23), threads=1)
        w2 = relative_volumes(two_cap_body, 0.2, rng(23), threads=2)
        assert np.allclose(w1, w2)
