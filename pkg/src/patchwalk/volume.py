"""Volume of a spherical patch component by multiphase annealing.

The surface volume of a component K is written as a telescoping product
over a family ``f_j(x) = exp(alpha_j mu.x)`` with ``0 = alpha_0 < ... <
alpha_k``::

    vol(K) = integral_K f_k  /  prod_j ( integral_K f_j / integral_K f_{j-1} )

Each phase ratio is a mean of ``f_j / f_{j-1}`` under samples from the
flatter ``f_{j-1}`` restricted to K (hit-and-run with Metropolis arc
draws; the reflective walk handles the uniform phase).  The schedule
raises alpha as fast as the empirical relative variance of the phase
ratio allows, and stops once almost all of the sphere-wide mass of f_k
sits inside K, certified by Bernoulli trials on exact whole-sphere vMF
draws.  The top integral over the whole sphere has a closed Bessel form,
so only the phase ratios are Monte Carlo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, ive

from .errors import (
    DegenerateMean,
    EmptyIntersection,
    NonConvergence,
    ScheduleStall,
)
from .topology import Component, PatchBody
from .walks import Chain, estimate_tau

LOG_2PI = math.log(2.0 * math.pi)


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (= 2 pi^{d/2} / Gamma(d/2))."""
    return float(np.exp(log_sphere_area(d)))


def log_sphere_area(d: int) -> float:
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)


def log_sphere_vmf_integral(alpha: float, d: int) -> float:
    """log of integral over the unit sphere in R^d of exp(alpha mu.x).

    Closed form via the modified Bessel function of the first kind:
    (2 pi)^{d/2} I_{d/2-1}(alpha) / alpha^{d/2-1}; evaluated through the
    exponentially scaled ``ive`` for stability at large alpha.
    """
    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    if alpha < 1e-12:
        return log_sphere_area(d)
    nu = 0.5 * d - 1.0
    scaled = float(ive(nu, alpha))
    if scaled > 0.0:
        log_bessel = math.log(scaled) + alpha
    else:
        # ive underflow (large order, small argument): leading series term.
        log_bessel = nu * math.log(0.5 * alpha) - gammaln(nu + 1.0)
    return 0.5 * d * LOG_2PI + log_bessel - nu * math.log(alpha)


@dataclass(frozen=True)
class VmfFunction:
    """Unnormalized density exp(alpha mu.x) on the sphere; alpha=0 is uniform."""

    mu: np.ndarray
    alpha: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if abs(np.linalg.norm(mu) - 1.0) > 1e-12:
            raise ValueError("mean direction must be unit norm")
        if self.alpha < 0.0:
            raise ValueError("concentration must be non-negative")
        object.__setattr__(self, "mu", mu)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.alpha * (np.asarray(x) @ self.mu))


@dataclass
class AnnealingParams:
    """Tuning of the annealing scheme; defaults follow the scheme's practice.

    ``n_prime`` (schedule sample size) defaults to 1200 + d^2 and ``window``
    (ratio-convergence sliding window) to 4 d^2 + 500.  ``delta`` is the
    lower edge of the variance window [1-delta, 1] used in the exponent
    search; ``eps0``/``zeta`` control the Bernoulli stopping certificate.
    """

    eps0: float = 0.05
    zeta: float = 0.05
    delta: float = 0.1
    n_prime: int | None = None
    window: int | None = None
    sample_cap: int = 10_000_000
    burn: int = 100
    inner_mh: int = 10
    top_samples: int | None = None
    max_phases: int = 200

    def resolved(self, d: int) -> "AnnealingParams":
        out = AnnealingParams(**self.__dict__)
        if out.n_prime is None:
            out.n_prime = 1200 + d * d
        if out.window is None:
            out.window = 4 * d * d + 500
        return out


@dataclass
class AnnealingState:
    """Schedule and per-phase bookkeeping for one component."""

    mu: np.ndarray
    alphas: list = field(default_factory=lambda: [0.0])
    log_ratios: list = field(default_factory=list)
    samples_consumed: int = 0
    window: int = 0

    @property
    def k(self) -> int:
        return len(self.alphas) - 1


@dataclass
class VolumeEstimate:
    """Result of one component's volume estimation.

    ``log_volume`` is the primary quantity (tiny high-dimensional patches
    underflow a plain float); ``volume`` is its exponential, possibly 0.0.
    """

    component_id: int
    volume: float
    eps: float
    phases: int
    schedule: list
    samples: int
    log_volume: float = -math.inf

    def to_dict(self) -> dict:
        return {
            "component_id": self.component_id,
            "volume": self.volume,
            "log_volume": self.log_volume,
            "eps": self.eps,
            "phases": self.phases,
            "schedule": list(self.schedule),
            "samples": self.samples,
        }


def vmf_exact_sample(
    mu: np.ndarray, alpha: float, rng: np.random.Generator, n: int = 1
) -> np.ndarray:
    """Exact draws from the vMF distribution on the sphere (whole sphere).

    Classical rejection scheme for the cosine marginal (beta envelope),
    combined with a uniform tangent direction.  alpha = 0 degenerates to
    the uniform distribution.
    """
    mu = np.asarray(mu, dtype=float)
    d = mu.shape[0]
    if alpha < 0.0:
        raise ValueError("concentration must be non-negative")
    if alpha == 0.0:
        x = rng.standard_normal((n, d))
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    m = d - 1.0
    # Rationalized form: no cancellation at large concentration.
    b = m / (math.sqrt(4.0 * alpha**2 + m * m) + 2.0 * alpha)
    x0 = (1.0 - b) / (1.0 + b)
    c = alpha * x0 + m * math.log(1.0 - x0 * x0)

    w = np.empty(n)
    filled = 0
    while filled < n:
        k = n - filled
        z = rng.beta(0.5 * m, 0.5 * m, size=k)
        wc = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.random(k)
        ok = alpha * wc + m * np.log(1.0 - x0 * wc) - c >= np.log(u)
        cnt = int(np.count_nonzero(ok))
        w[filled : filled + cnt] = wc[ok]
        filled += cnt

    v = rng.standard_normal((n, d))
    v -= np.outer(v @ mu, mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return w[:, None] * mu[None, :] + np.sqrt(np.maximum(0.0, 1.0 - w * w))[:, None] * v


def choose_mu(samples: np.ndarray) -> np.ndarray:
    """Mean direction from cached uniform samples (spherical centroid proxy).

    Raises DegenerateMean when the centroid norm is below 1e-8; the caller
    falls back to the component's starting point.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 100:
        raise ValueError("need at least 100 cached uniform samples")
    m = samples.mean(axis=0)
    n = np.linalg.norm(m)
    if n < 1e-8:
        raise DegenerateMean("sample centroid is numerically zero")
    return m / n


def _mean_direction(body: PatchBody, comp: Component, samples: np.ndarray) -> np.ndarray:
    """Concentration center for the annealing family.

    The normalized sample centroid is used when it lies inside the
    component; on ring- or band-shaped components the centroid direction
    can fall outside (its vMF family would never concentrate into the
    component), in which case the sample closest to the centroid is used,
    with the component's starting point as the final fallback.
    """
    try:
        mu = choose_mu(samples)
    except DegenerateMean:
        return np.array(comp.starting_point, dtype=float)
    if int(body.membership_batch(mu[None, :])[0]) == comp.id:
        return mu
    nearest = samples[int(np.argmax(samples @ mu))]
    if int(body.membership_batch(nearest[None, :])[0]) == comp.id:
        return np.array(nearest, dtype=float)
    return np.array(comp.starting_point, dtype=float)


def _log_relative_variance(dalpha: float, t: np.ndarray) -> float:
    """log of Var[w]/Mean[w]^2 + 1 = E[w^2]/E[w]^2 for w = exp(dalpha t)."""
    n = t.shape[0]
    w = dalpha * t
    m1 = _logsumexp(w) - math.log(n)
    m2 = _logsumexp(2.0 * w) - math.log(n)
    return m2 - 2.0 * m1


def _logsumexp(w: np.ndarray) -> float:
    m = float(np.max(w))
    return m + math.log(float(np.sum(np.exp(w - m))))


def _variance_ok(dalpha: float, t: np.ndarray) -> bool:
    # Var/Mean^2 <= 1  <=>  E[w^2]/E[w]^2 <= 2.
    return _log_relative_variance(dalpha, t) <= math.log(2.0)


# Hard safety cap on any single concentration value; a component so small
# that the stop rule has not fired by here is numerically a point.
ALPHA_CAP = 1e14


def first_alpha(
    t_uniform: np.ndarray,
    rel_tol: float = 1e-3,
    ceiling=None,
    alpha_cap: float = ALPHA_CAP,
) -> float:
    """First positive concentration of the schedule, by bracketed bisection.

    ``t_uniform`` holds mu.x over the uniform sample.  The accepted alpha is
    the largest for which the empirical relative variance of exp(alpha t)
    stays within the unit window (at alpha = 0 the function ratio is exactly
    one and the variance is zero); doubling finds the failing bracket and
    bisection to ``rel_tol`` on alpha returns the passing end.  An optional
    ``ceiling(alpha) -> bool`` is polled during doubling so the schedule
    never overshoots the stopping rule (tiny cap-like components keep the
    ratio variance small at any concentration).
    """
    hi = 1.0
    while _variance_ok(hi, t_uniform):
        if ceiling is not None and ceiling(hi):
            return hi
        hi *= 2.0
        if hi >= alpha_cap:
            return alpha_cap
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _variance_ok(mid, t_uniform):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise ScheduleStall("no positive first concentration passes the window")
    return lo


def next_alpha(
    alpha_prev: float,
    t_prev: np.ndarray,
    d: int,
    delta: float = 0.1,
    rel_tol: float = 1e-3,
    ceiling=None,
    alpha_cap: float = ALPHA_CAP,
) -> float:
    """Next concentration: alpha_prev * (1 + 1/d)^r with the largest viable r.

    ``t_prev`` holds mu.x over samples from the previous phase density.
    r maximizes the exponent subject to the empirical Var/Mean^2 of the
    phase ratio lying in [1-delta, 1]; the bracket doubles r until the
    variance window fails (the mean ratio already exceeds one for any
    positive r), then bisects to ``rel_tol`` relative.  ``ceiling`` plays
    the same schedule-stopping role as in :func:`first_alpha`.  Raises
    ScheduleStall when no positive exponent passes.
    """
    if alpha_prev <= 0.0:
        raise ValueError("use first_alpha for the initial phase")
    base = math.log1p(1.0 / d)
    r_cap = math.log(alpha_cap / alpha_prev) / base if alpha_prev < alpha_cap else 0.0

    def alpha_at(r: float) -> float:
        return alpha_prev * math.exp(base * r)

    def ok(r: float) -> bool:
        return _variance_ok(alpha_at(r) - alpha_prev, t_prev)

    def in_window(r: float) -> bool:
        lrv = _log_relative_variance(alpha_at(r) - alpha_prev, t_prev)
        return math.log(2.0 - delta) <= lrv <= math.log(2.0)

    if r_cap <= 0.0:
        return alpha_prev
    if not ok(min(1e-9, r_cap)):
        raise ScheduleStall("variance window fails at vanishing exponent")
    hi = min(1.0, r_cap)
    while ok(hi):
        if ceiling is not None and ceiling(alpha_at(hi)):
            return alpha_at(hi)
        if hi >= r_cap:
            return alpha_at(r_cap)
        hi = min(2.0 * hi, r_cap)
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
            if in_window(mid):
                break
        else:
            hi = mid
    if lo <= 1e-9:
        raise ScheduleStall("no positive exponent satisfies the variance window")
    return alpha_at(lo)


def hoeffding_trials(eps0: float, zeta: float) -> int:
    """Bernoulli sample size ceil(log(1/(1-zeta)) / eps0^2) of the stop rule."""
    return int(math.ceil(math.log(1.0 / (1.0 - zeta)) / eps0**2))


def stop_check(
    body: PatchBody,
    comp: Component,
    mu: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
    eps0: float = 0.05,
    zeta: float = 0.05,
    nu: int | None = None,
) -> bool:
    """True when almost all whole-sphere vMF mass lies inside the component.

    Draws ``nu`` exact vMF points on the sphere and passes when fewer than
    ``eps0 * nu`` fall outside the component (membership test; boundary
    contacts count as outside).
    """
    if nu is None:
        nu = hoeffding_trials(eps0, zeta)
    pts = vmf_exact_sample(mu, alpha, rng, nu)
    labels = body.membership_batch(pts)
    outside = int(np.count_nonzero(labels != comp.id))
    return outside < eps0 * nu


class _RatioStream:
    """Streaming phase-ratio estimate with sliding-window convergence.

    Tracks the running mean of exp(dalpha * t) in log space; after every
    sample the running value enters a ring buffer of length ``window`` and
    convergence is declared when (max - min)/min over the full window drops
    to ``eps_ratio``.
    """

    def __init__(self, dalpha: float, window: int, eps_ratio: float):
        self.dalpha = dalpha
        self.window = window
        self.eps_ratio = eps_ratio
        self.buf = np.empty(window)
        self.pos = 0
        self.count = 0
        self.log_sum = -np.inf

    def push_block(self, t: np.ndarray) -> bool:
        """Feed mu.x values; returns True once converged."""
        if self.dalpha == 0.0:
            # identical phase functions: the ratio is exactly one
            self.count += t.size
            self.log_sum = math.log(self.count)
            self.buf[:] = 0.0
            return self.count >= self.window
        lw = self.dalpha * t
        cums = np.logaddexp.accumulate(np.concatenate(([self.log_sum], lw)))[1:]
        self.log_sum = float(cums[-1])
        running = cums - np.log(np.arange(self.count + 1, self.count + t.size + 1))
        for val in running:  # ring-buffer insert
            self.buf[self.pos] = val
            self.pos = (self.pos + 1) % self.window
        self.count += t.size
        if self.count < self.window:
            return False
        spread = math.expm1(float(np.max(self.buf) - np.min(self.buf)))
        return spread <= self.eps_ratio

    @property
    def log_ratio(self) -> float:
        return self.log_sum - math.log(self.count)


def ratio_estimate(
    chain_draw,
    dalpha: float,
    window: int,
    eps_k: float,
    warm_t: np.ndarray | None = None,
    sample_cap: int = 10_000_000,
    block: int = 512,
) -> tuple[float, int]:
    """One telescoping ratio, integral of f_j over integral of f_{j-1}.

    ``chain_draw(n) -> t`` must yield mu.x values of fresh samples from the
    f_{j-1} phase distribution on the component.  ``warm_t`` re-uses the
    samples already drawn for the schedule search.  Returns (log ratio,
    samples consumed); raises NonConvergence at the sample cap.
    """
    stream = _RatioStream(dalpha, window, eps_k / 2.0)
    consumed = 0
    if warm_t is not None and warm_t.size:
        if stream.push_block(np.asarray(warm_t, dtype=float)):
            return stream.log_ratio, consumed
    while consumed < sample_cap:
        t = chain_draw(block)
        consumed += t.size
        if stream.push_block(t):
            return stream.log_ratio, consumed
    raise NonConvergence(
        f"phase ratio did not converge within {sample_cap} samples"
    )


def estimate_volume(
    body: PatchBody,
    comp: Component,
    eps: float,
    rng: np.random.Generator,
    params: AnnealingParams | None = None,
) -> VolumeEstimate:
    """Estimate the surface volume of one component to relative error eps.

    Assembles the telescoping product: closed-form sphere integral of the
    final function, times the measured inside fraction, divided by the
    estimated phase ratios.  Per-phase ratio budget is eps / (2 sqrt(k)),
    re-tightened as the schedule grows.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    if comp.starting_point is None:
        raise EmptyIntersection("component is empty")
    simplex = body.simplex
    d = simplex.dim
    prm = (params or AnnealingParams()).resolved(d)
    if prm.top_samples is None:
        # Half the error budget is reserved for the top integral; a Bernoulli
        # fraction near 1 - eps0 needs ~ (1 - p)/(p (eps/2)^2) draws.
        prm.top_samples = max(1000, math.ceil(4.0 * prm.eps0 / eps**2))

    # Large components are cheapest by direct rejection: when a uniform
    # sphere sample lands inside often enough to meet the error budget,
    # the annealing machinery is unnecessary.  Small components (where
    # rejection starves) continue below.
    n_reject = min(int(math.ceil(256.0 / eps**2)), 400_000)
    pts = rng.standard_normal((n_reject, d))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    hits = int(np.count_nonzero(body.membership_batch(pts) == comp.id))
    if hits >= 64.0 / eps**2:
        log_vol = math.log(hits / n_reject) + log_sphere_area(d)
        return VolumeEstimate(
            component_id=comp.id,
            volume=float(np.exp(log_vol)),
            eps=eps,
            phases=0,
            schedule=[0.0],
            samples=n_reject,
            log_volume=float(log_vol),
        )

    tau = comp.trajectory_scale or estimate_tau(comp, simplex, rng)
    rho = 100 * d

    # Uniform phase: reflective walk, also feeds the mean direction choice.
    chain = Chain(simplex, comp.starting_point, rng)
    chain.reflective_steps(prm.burn, tau, rho)
    uniform_pts = chain.reflective_steps(prm.n_prime, tau, rho)
    mu = _mean_direction(body, comp, uniform_pts)
    state = AnnealingState(mu=mu, window=prm.window)
    state.samples_consumed += prm.burn + prm.n_prime

    def finish(log_inside_fraction: float, alpha_k: float) -> VolumeEstimate:
        log_vol = (
            log_inside_fraction
            + log_sphere_vmf_integral(alpha_k, d)
            - sum(state.log_ratios)
        )
        log_vol = min(log_vol, log_sphere_area(d))
        with np.errstate(over="ignore", under="ignore"):
            vol = float(np.exp(log_vol))
        return VolumeEstimate(
            component_id=comp.id,
            volume=vol,
            eps=eps,
            phases=state.k,
            schedule=list(state.alphas),
            samples=state.samples_consumed,
            log_volume=float(log_vol),
        )

    def inside_fraction(alpha: float) -> float:
        pts = vmf_exact_sample(mu, alpha, rng, prm.top_samples)
        labels = body.membership_batch(pts)
        frac = float(np.count_nonzero(labels == comp.id)) / prm.top_samples
        state.samples_consumed += prm.top_samples
        if frac <= 0.0:
            raise NonConvergence("no final-phase mass found inside the component")
        return frac

    if stop_check(body, comp, mu, 0.0, rng, prm.eps0, prm.zeta):
        return finish(math.log(inside_fraction(0.0)), 0.0)

    t_prev = uniform_pts @ mu
    alpha_prev = 0.0
    uniform_chain = chain

    def stop_ceiling(alpha: float) -> bool:
        return stop_check(body, comp, mu, alpha, rng, prm.eps0, prm.zeta)

    for phase in range(1, prm.max_phases + 1):
        if alpha_prev == 0.0:
            alpha_j = first_alpha(t_prev, ceiling=stop_ceiling)
        else:
            alpha_j = next_alpha(alpha_prev, t_prev, d, prm.delta, ceiling=stop_ceiling)
        state.alphas.append(alpha_j)

        # Error budget per phase, re-tightened as k grows (eps / (2 sqrt k)).
        eps_k = eps / (2.0 * math.sqrt(phase))

        if alpha_prev == 0.0:
            def draw(nblk: int) -> np.ndarray:
                return uniform_chain.reflective_steps(nblk, tau, rho) @ mu
        else:
            prev_chain = chain
            prev_alpha = alpha_prev

            def draw(nblk: int) -> np.ndarray:
                return prev_chain.vmf_steps(nblk, mu, prev_alpha, prm.inner_mh) @ mu

        log_r, used = ratio_estimate(
            draw,
            alpha_j - alpha_prev,
            prm.window,
            eps_k,
            warm_t=t_prev,
            sample_cap=prm.sample_cap,
        )
        state.log_ratios.append(log_r)
        state.samples_consumed += used

        if stop_check(body, comp, mu, alpha_j, rng, prm.eps0, prm.zeta):
            return finish(math.log(inside_fraction(alpha_j)), alpha_j)

        # Next phase density: continue from the current point, burn, draw.
        chain = Chain(simplex, chain.point.copy(), rng)
        chain.vmf_steps(prm.burn, mu, alpha_j, prm.inner_mh)
        pts = chain.vmf_steps(prm.n_prime, mu, alpha_j, prm.inner_mh)
        state.samples_consumed += prm.burn + prm.n_prime
        t_prev = pts @ mu
        alpha_prev = alpha_j

    raise NonConvergence(f"annealing schedule exceeded {prm.max_phases} phases")


def _component_volume_task(args):
    """Worker for parallel estimation; rebuilds the body deterministically."""
    from .topology import SimplexH, build_patch

    simplex_json, comp_id, tau_cache, eps, child_rng, params = args
    body = build_patch(SimplexH.from_json(simplex_json))
    comp = body.components[comp_id]
    comp.trajectory_scale = tau_cache  # keep stream consumption identical
    return estimate_volume(body, comp, eps, child_rng, params).log_volume


def relative_volumes(
    body: PatchBody,
    eps: float,
    rng: np.random.Generator,
    params: AnnealingParams | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Relative component weights w_i = vol(K_i) / sum vol(K_j), cached.

    With a single component the weight is exactly one and no estimation
    runs.  Each component consumes an independent child stream, so the
    result does not depend on estimation order or on ``threads``.
    """
    if body.M == 0:
        raise EmptyIntersection("the body has no components")
    if body.M == 1:
        body.components[0].relative_volume = 1.0
        return np.array([1.0])
    children = rng.spawn(body.M)
    if threads > 1 and body.M > 1:
        from concurrent.futures import ProcessPoolExecutor

        sx = body.simplex.to_json()
        args = [
            (sx, i, body.components[i].trajectory_scale, eps, children[i], params)
            for i in range(body.M)
        ]
        with ProcessPoolExecutor(max_workers=min(threads, body.M)) as pool:
            log_vols = np.array(list(pool.map(_component_volume_task, args)))
    else:
        log_vols = np.empty(body.M)
        for i, comp in enumerate(body.components):
            log_vols[i] = estimate_volume(body, comp, eps, children[i], params).log_volume
    # Normalize in log space; tiny components underflow plain floats.
    shifted = log_vols - np.max(log_vols)
    weights = np.exp(shifted)
    weights /= weights.sum()
    for comp, w in zip(body.components, weights):
        comp.relative_volume = float(w)
    return weights
