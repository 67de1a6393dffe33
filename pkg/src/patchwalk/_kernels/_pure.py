"""Pure-numpy walk kernels; reference semantics for the compiled backend.

All randomness is passed in as pre-drawn arrays (one row of standard
normals plus uniforms per step), so a chain's trajectory is a deterministic
function of those arrays.  The compiled backend consumes the identical
arrays in the identical order; the two differ only by floating-point
summation order.

Angle conventions: boundary contacts of the great circle through ``p``
with tangent ``v`` are found from the per-facet equations
``(a.p) cos t + (a.v) sin t = b``; the sub-arc inside the simplex that
contains the anchor may wrap past the antipode, so its endpoints are
reported in (-2pi, 0] x [0, 2pi) with the anchor at t = 0.

Every step ends with a containment backstop: a landing that violates the
simplex beyond tolerance (possible only through degenerate corner
geometry) is rolled back to the step's start point and counted, so the
walk invariant ``A p <= b + 1e-9`` holds unconditionally.
"""
from __future__ import annotations

import numpy as np

# Contact angles smaller than this are the anchor's own boundary contact.
OWN_CONTACT = 1e-12
# After reflecting off a facet, its own re-contact root reappears within
# angle noise up to ~sqrt(eps); ignore that facet below this angle.
SAME_FACET = 1e-7
TWO_PI = 2.0 * np.pi
FEAS_TOL = 1e-9

OK = 0


def _tangent(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    v = u - (p @ u) * p
    n = np.linalg.norm(v)
    if n < 1e-12:
        # Deterministic fallback for the probability-zero degenerate draw:
        # project the axis least aligned with p.
        k = int(np.argmin(np.abs(p)))
        v = -p[k] * p
        v[k] += 1.0
        n = np.linalg.norm(v)
    return v / n


def _contact_angles(Ap: np.ndarray, Av: np.ndarray, b: np.ndarray):
    """All validated boundary-contact angles in (-pi, pi], with facet ids."""
    R = np.hypot(Ap, Av)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(R > 0.0, b / R, 2.0)
    hit = np.abs(z) <= 1.0
    if not np.any(hit):
        return np.empty(0), np.empty(0, dtype=np.intp)
    idx = np.where(hit)[0]
    phi = np.arctan2(Av[idx], Ap[idx])
    ac = np.arccos(np.clip(z[idx], -1.0, 1.0))
    th = np.concatenate([phi + ac, phi - ac])
    facets = np.concatenate([idx, idx])
    th = np.mod(th + np.pi, TWO_PI) - np.pi  # wrap to (-pi, pi]
    # Validate against the facet equation (guards wrap/branch slips).
    resid = np.abs(Ap[facets] * np.cos(th) + Av[facets] * np.sin(th) - b[facets])
    scale = np.maximum(1.0, np.maximum(np.abs(b[facets]), R[facets]))
    keep = resid <= 1e-8 * scale
    return th[keep], facets[keep]


def _arc(Ap, Av, b):
    """Endpoints (t_minus, t_plus, bounded) of the in-simplex sub-arc at t=0."""
    th, _ = _contact_angles(Ap, Av, b)
    th = th[np.abs(th) >= OWN_CONTACT]  # anchor's own boundary contact
    if th.size == 0:
        return -np.pi, np.pi, False
    pos = np.where(th > 0.0, th, th + TWO_PI)
    neg = np.where(th < 0.0, th, th - TWO_PI)
    return float(np.max(neg)), float(np.min(pos)), True


def _first_contact(Ap, Av, b, exclude: int = -1):
    """Smallest forward contact angle and its facet, or (inf, -1).

    ``exclude`` suppresses near-zero re-contacts of the facet the
    trajectory just reflected off; contacts of other facets count at any
    positive angle (corner collisions are genuine).
    """
    th, facets = _contact_angles(Ap, Av, b)
    if th.size == 0:
        return np.inf, -1
    drop = (facets == exclude) & (np.abs(th) < SAME_FACET)
    th, facets = th[~drop], facets[~drop]
    if th.size == 0:
        return np.inf, -1
    fwd = np.where(th > 0.0, th, th + TWO_PI)
    k = int(np.argmin(fwd))
    return float(fwd[k]), int(facets[k])


def _renorm(p):
    return p / np.linalg.norm(p)


def _inside(A, b, p) -> bool:
    return bool(np.all(A @ p <= b + FEAS_TOL))


def gcw_uniform_chain(A, b, p, normals, u01, out, widths, counters):
    """Hit-and-run style geodesic steps with uniform arc sampling.

    Mutates ``p`` to the final point; writes each step's point into ``out``
    and its arc width into ``widths``.  A landing outside tolerance rolls
    back to the step's start (counted in ``counters[2]``).
    """
    n = normals.shape[0]
    for i in range(n):
        v = _tangent(p, normals[i])
        tm, tp, _ = _arc(A @ p, A @ v, b)
        th = tm + u01[i] * (tp - tm)
        cand = _renorm(np.cos(th) * p + np.sin(th) * v)
        if _inside(A, b, cand):
            p[:] = cand
        else:
            counters[2] += 1
        out[i] = p
        widths[i] = tp - tm
    return OK


def gcw_vmf_chain(A, b, p, mu, alpha, normals, uprop, uacc, out, counters):
    """Geodesic steps targeting exp(alpha mu.x), Metropolis moves on the arc.

    Each step runs ``uprop.shape[1]`` inner Metropolis iterations on the arc
    with a uniform window proposal of one third of the arc length, centered
    at the current angle and clipped to the arc (with the matching proposal
    correction), then moves to the final angle.
    """
    n, inner = uprop.shape
    for i in range(n):
        v = _tangent(p, normals[i])
        tm, tp, _ = _arc(A @ p, A @ v, b)
        cp = float(mu @ p)
        cv = float(mu @ v)
        h = (tp - tm) / 3.0
        th = 0.0
        if h > 0.0:
            for k in range(inner):
                lo = max(tm, th - 0.5 * h)
                hi = min(tp, th + 0.5 * h)
                wlen = hi - lo
                th_new = lo + uprop[i, k] * wlen
                lo2 = max(tm, th_new - 0.5 * h)
                hi2 = min(tp, th_new + 0.5 * h)
                wlen2 = hi2 - lo2
                logr = alpha * (
                    cp * (np.cos(th_new) - np.cos(th))
                    + cv * (np.sin(th_new) - np.sin(th))
                ) + np.log(wlen) - np.log(wlen2)
                if np.log(uacc[i, k]) <= logr:
                    th = th_new
        cand = _renorm(np.cos(th) * p + np.sin(th) * v)
        if _inside(A, b, cand):
            p[:] = cand
        else:
            counters[2] += 1
        out[i] = p
    return OK


def regcw_chain(A, b, p, tau, rho, normals, u01, out, counters):
    """Billiard-style geodesic steps with specular reflection at facets.

    Per step: trajectory length L = -tau ln(eta), travel the great circle,
    reflect at each facet contact, stop after length L.  A step needing
    more than ``rho`` reflections returns its starting point and bumps
    ``counters[0]``; ``counters[1]`` accumulates reflections performed and
    ``counters[2]`` counts boundary failures (tangent facets, corner
    escapes), also non-moves.
    """
    n = normals.shape[0]
    for i in range(n):
        eta = u01[i]
        if eta <= 0.0:
            eta = np.finfo(float).tiny
        L = -tau * np.log(eta)
        v = _tangent(p, normals[i])
        p0 = p.copy()
        refl = 0
        exclude = -1
        while True:
            tstar, jstar = _first_contact(A @ p, A @ v, b, exclude)
            if jstar < 0 or L < tstar:
                cand = _renorm(np.cos(L) * p + np.sin(L) * v)
                if _inside(A, b, cand):
                    p[:] = cand
                else:
                    p[:] = p0
                    counters[2] += 1
                break
            q = _renorm(np.cos(tstar) * p + np.sin(tstar) * v)
            vin = -np.sin(tstar) * p + np.cos(tstar) * v
            vin -= (vin @ q) * q
            vin /= np.linalg.norm(vin)
            a = A[jstar]
            aproj = a - (a @ q) * q
            na = np.linalg.norm(aproj)
            if na < 1e-12 * np.linalg.norm(a):
                p[:] = p0
                counters[2] += 1
                break
            aproj = aproj / na
            v = vin - 2.0 * (vin @ aproj) * aproj
            v -= (v @ q) * q
            v /= np.linalg.norm(v)
            p[:] = q
            L -= tstar
            refl += 1
            counters[1] += 1
            exclude = jstar
            if refl > rho:
                p[:] = p0
                counters[0] += 1
                break
        out[i] = p
    return OK
