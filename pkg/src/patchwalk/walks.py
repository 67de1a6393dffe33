"""Geodesic Markov chains on a spherical patch component.

Two walks are provided.  The hit-and-run style walk (``gcw``) picks a
uniformly random great circle through the current point, intersects it
with the simplex, and resamples the angle on the in-simplex sub-arc from
the target density restricted to that arc; with a uniform target the arc
draw is exactly uniform because the circle parametrization has unit speed.
The reflective walk (``regcw``) targets the uniform distribution only: it
draws an exponential trajectory length, follows the great circle, and
reflects the direction at every facet contact, returning the step's start
point when a reflection budget is exhausted (a counted non-move).

Per-step renormalization keeps iterates on the sphere to machine precision
over arbitrarily long runs.  Heavy lifting happens in the kernel backend
(compiled when available); the single-step functions here share its exact
angle conventions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import gcw_uniform_chain, gcw_vmf_chain, regcw_chain
from .errors import AnchorOutsideSimplex, EmptyIntersection, TangentFacet
from .topology import FEAS_TOL, Component, PatchBody, SimplexH

CHUNK = 4096
DEFAULT_INNER_MH = 10      # Metropolis iterations per arc for non-uniform targets
DEFAULT_WALK_LENGTH = 1    # steps burned per emitted sample (reflective walk)


@dataclass
class WalkParams:
    """Tuning knobs of the reflective walk.

    ``tau`` scales the exponential trajectory length (radians); ``rho``
    bounds reflections per step (default 100 d, set by the caller);
    ``walk_length`` is the number of steps burned per emitted sample.
    """

    tau: float
    rho: int
    walk_length: int = DEFAULT_WALK_LENGTH

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.rho < 1 or self.walk_length < 1:
            raise ValueError("rho and walk_length must be >= 1")


@dataclass(frozen=True)
class ArcInterval:
    """In-simplex sub-arc of a great circle, anchored at angle zero.

    ``theta_minus <= 0 <= theta_plus``; the range may extend past +-pi when
    the sub-arc wraps around the anchor's antipode (its length never
    exceeds 2 pi).  ``unbounded`` flags a circle that never leaves the
    simplex, reported as the full range [-pi, pi].
    """

    p: np.ndarray
    v: np.ndarray
    theta_minus: float
    theta_plus: float
    unbounded: bool = False

    def __post_init__(self):
        if not (self.theta_minus <= 0.0 <= self.theta_plus):
            raise ValueError("arc must contain its anchor at angle zero")

    @property
    def width(self) -> float:
        return self.theta_plus - self.theta_minus

    def point_at(self, theta: float) -> np.ndarray:
        q = np.cos(theta) * self.p + np.sin(theta) * self.v
        return q / np.linalg.norm(q)


@dataclass
class WalkState:
    """Current point plus counters; confined to one execution thread."""

    point: np.ndarray
    component_id: int
    rng: np.random.Generator
    steps: int = 0
    boundary_failures: int = 0
    budget_violations: int = 0
    reflections: int = 0

    def counters(self) -> dict:
        rate = self.budget_violations / self.steps if self.steps else 0.0
        return {
            "steps": self.steps,
            "boundary_failures": self.boundary_failures,
            "budget_violations": self.budget_violations,
            "reflections": self.reflections,
            "violation_rate": rate,
        }


def random_tangent(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector in the tangent hyperplane at p.

    Projects a uniform sphere direction onto ``{x : p.x = 0}`` and
    normalizes; redraws internally on a (probability-zero) degenerate
    projection.
    """
    p = np.asarray(p, dtype=float)
    for _ in range(64):
        u = rng.standard_normal(p.shape[0])
        v = u - (p @ u) * p
        n = np.linalg.norm(v)
        if n >= 1e-12:
            return v / n
    raise RuntimeError("tangent projection degenerate 64 times; p not unit?")


def arc_in_simplex(p: np.ndarray, v: np.ndarray, simplex: SimplexH) -> ArcInterval:
    """In-simplex sub-arc of the great circle through p with tangent v.

    Per facet, contact angles solve ``(a.p) cos t + (a.v) sin t = b``; every
    candidate is validated against that equation and the candidates nearest
    the anchor on each side become the endpoints.  Raises
    AnchorOutsideSimplex when p violates the simplex.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not simplex.contains(p, tol=FEAS_TOL):
        raise AnchorOutsideSimplex("arc anchor violates the simplex constraints")
    from ._kernels import pure

    tm, tp, bounded = pure._arc(simplex.A @ p, simplex.A @ v, simplex.b)
    return ArcInterval(p=p, v=v, theta_minus=tm, theta_plus=tp, unbounded=not bounded)


def uniform_arc_sample(arc: ArcInterval, rng: np.random.Generator) -> float:
    """Uniform angle on the arc (exact: the circle has unit speed)."""
    if arc.theta_plus == arc.theta_minus:
        return arc.theta_minus
    return arc.theta_minus + rng.random() * arc.width


def mh_arc_sample(
    arc: ArcInterval,
    mu: np.ndarray,
    alpha: float,
    current: float,
    rng: np.random.Generator,
    inner: int = DEFAULT_INNER_MH,
) -> float:
    """Metropolis draw targeting exp(alpha mu.x) restricted to the arc.

    Proposal: uniform on a window of one third of the arc length centered
    at the current angle, clipped to the arc, with the matching proposal
    correction so detailed balance holds at the edges.  The chain advances
    ``inner`` iterations (default 10) before the angle is returned; at
    alpha = 0 the kernel is uniform-invariant.
    """
    if alpha < 0.0:
        raise ValueError("concentration must be non-negative")
    tm, tp = arc.theta_minus, arc.theta_plus
    if not tm <= current <= tp:
        raise ValueError("current angle is outside the arc")
    h = (tp - tm) / 3.0
    if h <= 0.0:
        return current
    cp = float(mu @ arc.p)
    cv = float(mu @ arc.v)
    th = current
    for _ in range(inner):
        lo, hi = max(tm, th - 0.5 * h), min(tp, th + 0.5 * h)
        wlen = hi - lo
        th_new = lo + rng.random() * wlen
        lo2, hi2 = max(tm, th_new - 0.5 * h), min(tp, th_new + 0.5 * h)
        wlen2 = hi2 - lo2
        logr = alpha * (
            cp * (np.cos(th_new) - np.cos(th)) + cv * (np.sin(th_new) - np.sin(th))
        ) + np.log(wlen) - np.log(wlen2)
        if np.log(rng.random()) <= logr:
            th = th_new
    return th


def reflect_direction(q: np.ndarray, v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Specular reflection of tangent v at boundary point q with facet normal a.

    The normal is first projected into the tangent hyperplane at q and
    normalized, so the reflected direction is again tangent at q and the
    continued curve is a great-circle arc.  Raises TangentFacet when the
    projected normal vanishes (facet normal parallel to q).
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    na = np.linalg.norm(a)
    if na == 0.0:
        raise TangentFacet("zero facet normal")
    ahat = a / na
    aproj = ahat - (ahat @ q) * q
    napr = np.linalg.norm(aproj)
    if napr < 1e-12:
        raise TangentFacet("facet normal is parallel to the sphere normal at q")
    aproj /= napr
    return v - 2.0 * (v @ aproj) * aproj


def gcw_step(state: WalkState, simplex: SimplexH, target) -> WalkState:
    """One hit-and-run style step; ``target(arc, rng) -> angle`` samples the arc.

    Use :func:`uniform_arc_sample` for the uniform target, or a closure over
    :func:`mh_arc_sample` for a concentration target.
    """
    v = random_tangent(state.point, state.rng)
    arc = arc_in_simplex(state.point, v, simplex)
    theta = float(target(arc, state.rng))
    state.point = arc.point_at(theta)
    state.steps += 1
    return state


def regcw_step(state: WalkState, simplex: SimplexH, params: WalkParams) -> WalkState:
    """One reflective-walk step (budget exhaustion is a counted non-move)."""
    p = np.ascontiguousarray(state.point, dtype=float)
    normals = state.rng.standard_normal((1, p.shape[0]))
    u01 = state.rng.random(1)
    out = np.empty((1, p.shape[0]))
    counters = np.zeros(3, dtype=np.int64)
    regcw_chain(simplex.A, simplex.b, p, params.tau, int(params.rho), normals, u01, out, counters)
    state.point = p
    state.steps += 1
    state.budget_violations += int(counters[0])
    state.reflections += int(counters[1])
    state.boundary_failures += int(counters[2])
    return state


class Chain:
    """Chunked kernel driver holding a persistent walk state.

    Draws randomness in fixed-size blocks (normals first, then uniforms)
    and hands it to the backend, so a given seed reproduces the same
    trajectory bit-for-bit on one platform and backend.
    """

    def __init__(self, simplex: SimplexH, point: np.ndarray, rng: np.random.Generator):
        if not simplex.contains(point, tol=FEAS_TOL):
            raise AnchorOutsideSimplex("chain start point violates the simplex")
        self.simplex = simplex
        self.point = np.ascontiguousarray(np.array(point, dtype=float))
        self.rng = rng
        self.steps = 0
        self.counters = np.zeros(3, dtype=np.int64)

    def uniform_steps(self, n: int):
        """n hit-and-run steps with uniform arc draws; returns (points, widths)."""
        d = self.point.shape[0]
        pts = np.empty((n, d))
        wid = np.empty(n)
        done = 0
        while done < n:
            k = min(CHUNK, n - done)
            normals = self.rng.standard_normal((k, d))
            u01 = self.rng.random(k)
            gcw_uniform_chain(
                self.simplex.A, self.simplex.b, self.point,
                normals, u01, pts[done : done + k], wid[done : done + k],
                self.counters,
            )
            done += k
        self.steps += n
        return pts, wid

    def vmf_steps(self, n: int, mu: np.ndarray, alpha: float, inner: int = DEFAULT_INNER_MH):
        """n hit-and-run steps targeting exp(alpha mu.x); returns points."""
        d = self.point.shape[0]
        mu = np.ascontiguousarray(mu, dtype=float)
        pts = np.empty((n, d))
        done = 0
        while done < n:
            k = min(CHUNK, n - done)
            normals = self.rng.standard_normal((k, d))
            uprop = self.rng.random((k, inner))
            uacc = self.rng.random((k, inner))
            gcw_vmf_chain(
                self.simplex.A, self.simplex.b, self.point,
                mu, float(alpha), normals, uprop, uacc, pts[done : done + k],
                self.counters,
            )
            done += k
        self.steps += n
        return pts

    def reflective_steps(self, n: int, tau: float, rho: int):
        """n reflective-walk steps; returns points (counters accumulate)."""
        d = self.point.shape[0]
        pts = np.empty((n, d))
        done = 0
        while done < n:
            k = min(CHUNK, n - done)
            normals = self.rng.standard_normal((k, d))
            u01 = self.rng.random(k)
            regcw_chain(
                self.simplex.A, self.simplex.b, self.point,
                float(tau), int(rho), normals, u01, pts[done : done + k], self.counters,
            )
            done += k
        self.steps += n
        return pts


def estimate_tau(comp: Component, simplex: SimplexH, rng: np.random.Generator) -> float:
    """Trajectory-length scale: max chord angle over 20 d uniform-target steps.

    Runs the hit-and-run walk from the component's starting point and takes
    the largest arc width observed; a full-circle arc contributes 2 pi.
    Caches the value on the component.
    """
    if comp.starting_point is None:
        raise EmptyIntersection("component has no starting point")
    d = simplex.dim
    chain = Chain(simplex, comp.starting_point, rng)
    _, widths = chain.uniform_steps(20 * d)
    tau = float(np.max(widths))
    if not tau > 0.0:
        raise EmptyIntersection("no positive chord angle observed")
    comp.trajectory_scale = tau
    return tau


def default_params(simplex: SimplexH, comp: Component, rng: np.random.Generator) -> WalkParams:
    """Reflective-walk defaults: tau from calibration, rho = 100 d, length 1."""
    tau = comp.trajectory_scale or estimate_tau(comp, simplex, rng)
    return WalkParams(tau=tau, rho=100 * simplex.dim, walk_length=DEFAULT_WALK_LENGTH)


def sample_component(
    body: PatchBody,
    comp: Component,
    n: int,
    rng: np.random.Generator,
    walk: str = "regcw",
    params: WalkParams | None = None,
    burn_in: int = 0,
    counters: np.ndarray | None = None,
) -> np.ndarray:
    """n uniform samples from one component.

    ``walk`` selects the reflective walk (default) or the uniform-target
    hit-and-run walk; ``params.walk_length`` steps are burned per emitted
    sample and ``burn_in`` extra steps are dropped up front.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if comp.starting_point is None:
        raise EmptyIntersection("component is empty")
    simplex = body.simplex
    if params is None:
        params = default_params(simplex, comp, rng)
    chain = Chain(simplex, comp.starting_point, rng)
    total = burn_in + n * params.walk_length
    if walk == "regcw":
        pts = chain.reflective_steps(total, params.tau, params.rho)
    elif walk == "gcw":
        pts, _ = chain.uniform_steps(total)
    else:
        raise ValueError(f"unknown walk {walk!r}")
    if counters is not None:
        counters += chain.counters
    return pts[burn_in + params.walk_length - 1 :: params.walk_length][:n]


def sample_patch(
    body: PatchBody,
    n: int,
    rng: np.random.Generator,
    params: WalkParams | None = None,
    burn_in: int = 0,
    counters: np.ndarray | None = None,
    walk: str = "regcw",
) -> tuple[np.ndarray, np.ndarray]:
    """n uniform samples across the whole body, components weighted by volume.

    Each draw picks a component from the cached relative volumes, then takes
    the next sample from that component's persistent chain.  Returns
    (points, component_ids).  Raises EmptyIntersection when M = 0 and
    VolumesNotCached when weights are missing.
    """
    if body.M == 0:
        raise EmptyIntersection("the body has no components")
    if walk not in ("regcw", "gcw"):
        raise ValueError(f"unknown walk {walk!r}")
    weights = body.weights()  # raises VolumesNotCached
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    picks = np.searchsorted(cum, rng.random(n), side="right")
    picks = np.minimum(picks, body.M - 1)

    child_rngs = rng.spawn(body.M)
    chains: dict[int, Chain] = {}
    wl: dict[int, WalkParams] = {}
    d = body.simplex.dim
    pts = np.empty((n, d))

    def advance(m: int, steps: int) -> np.ndarray:
        if walk == "regcw":
            return chains[m].reflective_steps(steps, wl[m].tau, wl[m].rho)
        return chains[m].uniform_steps(steps)[0]

    for i, m in enumerate(picks):
        m = int(m)
        if m not in chains:
            comp = body.components[m]
            wl[m] = params or default_params(body.simplex, comp, child_rngs[m])
            chains[m] = Chain(body.simplex, comp.starting_point, child_rngs[m])
            if burn_in:
                advance(m, burn_in)
        pts[i] = advance(m, wl[m].walk_length)[-1]
    if counters is not None:
        for ch in chains.values():
            counters += ch.counters
    return pts, picks.astype(int)
