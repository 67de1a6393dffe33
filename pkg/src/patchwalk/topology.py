"""Connected-component structure of the unit sphere clipped by a simplex.

The body of interest is the set of unit vectors satisfying a simplex
``A x <= b`` in R^d.  It is generally a union of disconnected spherical
patches.  The component structure is read off the simplex 1-skeleton:
drop every vertex strictly inside the unit ball, drop every edge whose
segment meets the sphere, and label the connected components of what is
left.  Each surviving graph component corresponds to exactly one patch,
which gives an O(d^2) membership oracle (shoot a ray from the origin,
find the exit facet, walk to a vertex visible from the exit point) and a
cheap starting point per patch (vertex-to-center segment crossing).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DegenerateSimplex,
    EmptyIntersection,
    NoCrossing,
    NumericallyOnBoundary,
)

# Membership-style tolerance (distances to facets), per contract.
FEAS_TOL = 1e-9
# A vertex counts as strictly inside the ball below 1 - BALL_TOL.
BALL_TOL = 1e-12


@dataclass(frozen=True)
class SimplexH:
    """Half-space form of a full-dimensional simplex: ``{x : A x <= b}``.

    ``A`` has shape (d+1, d) with one row per facet.  The constructor
    validates shape only; geometric non-degeneracy is checked lazily by
    :func:`vertices_of`.
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.ascontiguousarray(np.asarray(self.A, dtype=float))
        b = np.ascontiguousarray(np.asarray(self.b, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1] + 1:
            raise DegenerateSimplex(
                f"simplex in R^d needs d+1 facets, got A of shape {A.shape}"
            )
        if b.shape != (A.shape[0],):
            raise DegenerateSimplex("offset vector does not match facet count")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return bool(np.all(self.A @ x <= self.b + tol))

    def slack(self, x: np.ndarray) -> np.ndarray:
        """Per-facet slack b - A x (negative means violated)."""
        return self.b - self.A @ x

    def boundary_distance(self, x: np.ndarray) -> float:
        """Signed distance to the nearest facet hyperplane (negative outside)."""
        norms = np.linalg.norm(self.A, axis=1)
        return float(np.min(self.slack(x) / norms))

    def to_json(self) -> str:
        return json.dumps({"A": self.A.tolist(), "b": self.b.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SimplexH":
        doc = json.loads(text)
        return cls(np.asarray(doc["A"], dtype=float), np.asarray(doc["b"], dtype=float))


@dataclass
class Component:
    """One connected patch of the sphere-simplex body."""

    id: int
    vertex_ids: tuple[int, ...]
    starting_point: np.ndarray | None = None
    relative_volume: float | None = None
    # Walk-scale cache (max observed chord angle), filled by the samplers.
    trajectory_scale: float | None = None

    def summary(self) -> dict:
        return {
            "id": self.id,
            "vertex_ids": list(self.vertex_ids),
            "starting_point": None
            if self.starting_point is None
            else self.starting_point.tolist(),
            "relative_volume": self.relative_volume,
        }


@dataclass
class ComponentGraph:
    """Surviving 1-skeleton after ball-interior and sphere-crossing removals."""

    vertices: np.ndarray              # (d+1, d) simplex vertices
    inside_ball: np.ndarray           # (d+1,) bool, strictly inside unit ball
    edges: list[tuple[int, int]]      # surviving edges
    labels: np.ndarray                # (d+1,) int, -1 for removed vertices
    n_components: int


@dataclass
class PatchBody:
    """Simplex, component graph, components and caches bundled together."""

    simplex: SimplexH
    graph: ComponentGraph
    components: list[Component]
    inscribed_center: np.ndarray
    inscribed_radius: float
    transform: object | None = None   # optional PatchTransform back to weights
    _vertex_norms: np.ndarray = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return len(self.components)

    def weights(self) -> np.ndarray:
        if any(c.relative_volume is None for c in self.components):
            from .errors import VolumesNotCached

            raise VolumesNotCached("component volumes have not been estimated")
        return np.array([c.relative_volume for c in self.components])

    def membership(self, p: np.ndarray) -> int | None:
        return membership(p, self.graph, self.simplex)

    def membership_batch(self, points: np.ndarray) -> np.ndarray:
        return membership_batch(points, self.graph, self.simplex)

    def summary(self) -> dict:
        return {
            "dim": self.simplex.dim,
            "n_components": self.M,
            "components": [c.summary() for c in self.components],
        }


def simplex_from_vertices(verts: np.ndarray) -> SimplexH:
    """Half-space form of the simplex spanned by d+1 affinely independent rows."""
    V = np.asarray(verts, dtype=float)
    m, d = V.shape
    if m != d + 1:
        raise DegenerateSimplex(f"need d+1 vertices in R^d, got shape {V.shape}")
    A = np.empty((m, d))
    b = np.empty(m)
    for i in range(m):
        others = V[[j for j in range(m) if j != i]]
        diffs = others[1:] - others[0]
        # Hyperplane normal spans the null space of the face's direction rows.
        _, s, vh = np.linalg.svd(diffs)
        if s.size and s[-1] <= 1e-9 * s[0]:
            raise DegenerateSimplex("vertices are affinely dependent")
        normal = vh[-1]
        offset = float(normal @ others[0])
        if float(normal @ V[i]) > offset:
            normal, offset = -normal, -offset
        A[i], b[i] = normal, offset
    return SimplexH(A, b)


def vertices_of(simplex: SimplexH) -> np.ndarray:
    """Vertices of the simplex, row i solving every facet except facet i.

    Vertex i is opposite facet i: it satisfies the other d facet equations
    with equality and facet i strictly.  Raises DegenerateSimplex when any
    facet subsystem is singular or the strict-side check fails.
    """
    A, b = simplex.A, simplex.b
    m, d = A.shape
    verts = np.empty((m, d))
    for i in range(m):
        keep = [j for j in range(m) if j != i]
        sub = A[keep]
        # Relative conditioning gate; a simplex vertex solve must be well posed.
        if np.linalg.cond(sub) > 1e12:
            raise DegenerateSimplex(f"facet subsystem excluding {i} is singular")
        verts[i] = np.linalg.solve(sub, b[keep])
        slack_i = b[i] - A[i] @ verts[i]
        scale = np.linalg.norm(A[i]) * max(1.0, np.linalg.norm(verts[i]))
        if slack_i <= 1e-8 * max(1.0, scale):
            raise DegenerateSimplex(
                f"vertex {i} does not lie strictly inside its opposite facet"
            )
    return verts


def segment_sphere_intersects(u: np.ndarray, w: np.ndarray, tol: float = 1e-12) -> bool:
    """True iff the closed segment [u, w] contains a point of unit norm.

    Solves ||u + t (w - u)||^2 = 1 and checks for a root with t in [0, 1].
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    dvec = w - u
    a = float(dvec @ dvec)
    if a < tol * tol:
        raise ValueError("segment endpoints coincide")
    bq = 2.0 * float(u @ dvec)
    cq = float(u @ u) - 1.0
    disc = bq * bq - 4.0 * a * cq
    if disc < 0.0:
        return False
    sq = np.sqrt(disc)
    for t in ((-bq - sq) / (2 * a), (-bq + sq) / (2 * a)):
        if -tol <= t <= 1.0 + tol:
            return True
    return False


def _segment_crosses(norm2_u, norm2_w, dot_uw):
    """Vectorized segment-sphere test from precomputed inner products.

    Arguments are ||u||^2, ||w||^2 and u.w (broadcastable).  Equivalent to
    :func:`segment_sphere_intersects` up to tolerance handling.
    """
    a = norm2_u + norm2_w - 2.0 * dot_uw
    bq = 2.0 * (dot_uw - norm2_u)
    cq = norm2_u - 1.0
    disc = bq * bq - 4.0 * a * cq
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = (-bq - sq) / (2.0 * a)
        t2 = (-bq + sq) / (2.0 * a)
    ok = (disc >= 0.0) & (a > 0.0)
    in01 = lambda t: (t >= -1e-12) & (t <= 1.0 + 1e-12)  # noqa: E731
    return ok & (in01(t1) | in01(t2))


def build_component_graph(simplex: SimplexH) -> ComponentGraph:
    """1-skeleton of the simplex with sphere-blocked vertices/edges removed.

    Removal rules: a vertex strictly inside the unit ball goes away with its
    incident edges; an edge whose segment meets the sphere goes away.  The
    remaining graph is labeled by union-find; the labels biject onto the
    connected patches of the sphere-simplex body.
    """
    verts = vertices_of(simplex)
    m = verts.shape[0]
    norms = np.linalg.norm(verts, axis=1)
    inside = norms < 1.0 - BALL_TOL

    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    edges: list[tuple[int, int]] = []
    for i in range(m):
        if inside[i]:
            continue
        for j in range(i + 1, m):
            if inside[j]:
                continue
            if not segment_sphere_intersects(verts[i], verts[j]):
                edges.append((i, j))
                union(i, j)

    labels = np.full(m, -1, dtype=int)
    roots: dict[int, int] = {}
    for i in range(m):
        if inside[i]:
            continue
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        labels[i] = roots[r]

    return ComponentGraph(
        vertices=verts,
        inside_ball=inside,
        edges=edges,
        labels=labels,
        n_components=len(roots),
    )


def membership(p: np.ndarray, graph: ComponentGraph, simplex: SimplexH) -> int | None:
    """Component id of a unit vector p, or None when p is outside the simplex.

    Shoots the origin ray through p to its exit point q on the simplex
    boundary, then returns the label of the first exit-facet vertex in index
    order whose segment to q misses the sphere.  Raises NumericallyOnBoundary
    when p sits within tolerance of a facet so callers can decide.
    """
    p = np.asarray(p, dtype=float)
    dist = simplex.boundary_distance(p)
    if dist < -FEAS_TOL:
        return None
    if abs(dist) <= FEAS_TOL:
        raise NumericallyOnBoundary(f"point is {dist:.3e} from the simplex boundary")
    labels = membership_batch(p[None, :], graph, simplex)
    lab = int(labels[0])
    if lab == -2:
        raise NumericallyOnBoundary("no exit-facet vertex is visible at tolerance")
    return None if lab < 0 else lab


def membership_batch(
    points: np.ndarray, graph: ComponentGraph, simplex: SimplexH
) -> np.ndarray:
    """Vectorized membership: label per row, -1 outside, -2 unresolved.

    Unlike :func:`membership` this never raises: rows on/over the boundary
    come back as -1 and rows where no exit-facet vertex is visible as -2.
    Used by the volume stopping rule and the test oracles, where boundary
    contacts just count as "outside".
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = P.shape
    A, b = simplex.A, simplex.b
    verts = graph.vertices
    m = verts.shape[0]
    labels = np.full(n, -1, dtype=int)

    AP = P @ A.T                                        # (n, d+1)
    inside = np.all(AP <= b[None, :] + FEAS_TOL, axis=1)
    if not np.any(inside):
        return labels

    # Ray exit: q = s p with s = min over {j : a_j.p > 0} of b_j / (a_j.p).
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(AP > 0.0, b[None, :] / AP, np.inf)
    s = np.min(ratios, axis=1)
    exit_facet = np.argmin(ratios, axis=1)

    norm2_p = np.einsum("ij,ij->i", P, P)
    PV = P @ verts.T                                    # (n, d+1) p.v_k
    norm2_v = np.einsum("ij,ij->i", verts, verts)

    with np.errstate(invalid="ignore"):
        q2 = s * s * norm2_p                            # ||exit point||^2
        crosses = _segment_crosses(q2[:, None], norm2_v[None, :], s[:, None] * PV)
    visible = ~crosses & (graph.labels[None, :] >= 0)
    visible[np.arange(n), exit_facet] = False           # opposite vertex not on facet
    visible &= np.isfinite(s)[:, None]

    any_vis = visible.any(axis=1)
    first = np.argmax(visible, axis=1)                  # first visible, index order
    pick = inside & any_vis & np.isfinite(s)
    labels[pick] = graph.labels[first[pick]]
    labels[inside & ~pick] = -2
    return labels


def _min_norm_point(V: np.ndarray, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Wolfe's algorithm: the point of conv(rows of V) closest to the origin."""
    k = V.shape[0]
    norms2 = np.einsum("ij,ij->i", V, V)
    corral = [int(np.argmin(norms2))]
    lam = np.array([1.0])
    x = V[corral[0]].copy()
    scale = max(1.0, float(np.max(norms2)))
    for _ in range(max_iter):
        j = int(np.argmin(V @ x))
        if float(x @ x) - float(x @ V[j]) <= tol * scale:
            return x
        if j in corral:
            return x
        corral.append(j)
        lam = np.append(lam, 0.0)
        while True:
            # Affine minimizer over the corral: KKT system with sum-to-one.
            VS = V[corral]
            kk = len(corral)
            G = np.empty((kk + 1, kk + 1))
            G[:kk, :kk] = VS @ VS.T
            G[:kk, kk] = 1.0
            G[kk, :kk] = 1.0
            G[kk, kk] = 0.0
            rhs = np.zeros(kk + 1)
            rhs[kk] = 1.0
            try:
                mu = np.linalg.solve(G, rhs)[:kk]
            except np.linalg.LinAlgError:
                mu = np.linalg.lstsq(G, rhs, rcond=None)[0][:kk]
            if np.all(mu > 1e-14):
                lam = mu
                x = VS.T @ lam
                break
            # Step toward mu until a weight hits zero, then drop it.
            diff = lam - mu
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(diff > 1e-16, lam / diff, np.inf)
            theta = min(1.0, float(np.min(steps)))
            lam = (1.0 - theta) * lam + theta * mu
            keep = lam > 1e-14
            if keep.all():
                keep[int(np.argmin(lam))] = False
            corral = [c for c, kp in zip(corral, keep) if kp]
            lam = lam[keep]
            lam /= lam.sum()
    return x


def inscribed_ball(simplex: SimplexH, tol: float = 1e-9):
    """Largest ball inside simplex-and-unit-ball, by certified bisection on r.

    The program is max r with ``a_j.x + r ||a_j|| <= b_j`` and
    ``||x|| <= 1 - r``.  Feasibility of a candidate r is decided exactly:
    the facet constraints describe the simplex shrunk by r (its vertices are
    affine in r), and r is feasible iff the min-norm point of that shrunk
    simplex has norm at most 1 - r.  Feasible r values form an interval, so
    bisection certifies the optimum well inside the 1e-6 contract.

    Returns (center, radius); raises EmptyIntersection when no r > 0 exists.
    """
    A, b = simplex.A, simplex.b
    m, d = A.shape
    row_norms = np.linalg.norm(A, axis=1)

    # Chebyshev radius of the simplex alone bounds r from above.
    c = np.zeros(d + 1)
    c[-1] = -1.0
    G = np.hstack([A, row_norms[:, None]])
    res = linprog(c, A_ub=G, b_ub=b, bounds=[(None, None)] * (d + 1), method="highs")
    if not res.success or res.x[d] <= 0.0:
        raise EmptyIntersection("simplex has empty interior")
    r_cheb = float(res.x[d])

    # Vertex of the shrunk simplex opposite facet i: base_i - r * dir_i.
    base = np.empty((m, d))
    direction = np.empty((m, d))
    for i in range(m):
        keep = [j for j in range(m) if j != i]
        sub = A[keep]
        if np.linalg.cond(sub) > 1e12:
            raise DegenerateSimplex(f"facet subsystem excluding {i} is singular")
        base[i] = np.linalg.solve(sub, b[keep])
        direction[i] = np.linalg.solve(sub, row_norms[keep])

    def witness(r: float):
        x = _min_norm_point(base - r * direction)
        return x if np.linalg.norm(x) <= 1.0 - r + 1e-12 else None

    hi = min(r_cheb, 1.0)
    x_hi = witness(hi)
    if x_hi is not None:
        return x_hi, hi
    lo, x_lo = 0.0, witness(0.0)
    if x_lo is None:
        raise EmptyIntersection("simplex and unit ball do not overlap")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        x_mid = witness(mid)
        if x_mid is not None:
            lo, x_lo = mid, x_mid
        else:
            hi = mid
    if lo <= tol:
        raise EmptyIntersection("no ball of positive radius fits")
    return x_lo, lo


def starting_point(
    comp: Component, center: np.ndarray, graph: ComponentGraph, simplex: SimplexH
) -> np.ndarray:
    """Point of the component: sphere crossing of a vertex-to-center segment.

    The center must be a strictly interior point of both the simplex and the
    unit ball (the inscribed-ball center qualifies).  The crossing closest to
    the vertex lies in the vertex's component.
    """
    if not comp.vertex_ids:
        raise NoCrossing("component has no vertices")
    v = graph.vertices[comp.vertex_ids[0]]
    nv = np.linalg.norm(v)
    if abs(nv - 1.0) <= 1e-12:
        return v / nv
    dvec = center - v
    a = float(dvec @ dvec)
    bq = 2.0 * float(v @ dvec)
    cq = float(v @ v) - 1.0
    disc = bq * bq - 4.0 * a * cq
    if disc < 0.0:
        raise NoCrossing("vertex-to-center segment misses the sphere")
    sq = np.sqrt(disc)
    roots = sorted(t for t in ((-bq - sq) / (2 * a), (-bq + sq) / (2 * a)) if -1e-12 <= t <= 1 + 1e-12)
    if not roots:
        raise NoCrossing("no sphere crossing inside the segment")
    p = v + roots[0] * dvec
    return p / np.linalg.norm(p)


def build_patch(simplex: SimplexH, transform: object | None = None) -> PatchBody:
    """Assemble the component structure and a starting point per component.

    An empty body (M = 0) is a valid first-class result, not an error;
    sampling entry points are the ones that raise EmptyIntersection.  The
    graph alone cannot distinguish a simplex fully outside the closed ball
    (no removals, but the sphere never enters it) from a genuine patch, so
    the interior of simplex-and-ball is checked here: when it is empty the
    component list is empty regardless of the raw graph labels.
    """
    graph = build_component_graph(simplex)
    components: list[Component] = []
    center, radius = np.zeros(simplex.dim), 0.0
    if graph.n_components > 0:
        try:
            center, radius = inscribed_ball(simplex)
        except EmptyIntersection:
            graph.n_components = 0
            graph.labels = np.full_like(graph.labels, -1)
        else:
            for cid in range(graph.n_components):
                vids = tuple(int(i) for i in np.where(graph.labels == cid)[0])
                comp = Component(id=cid, vertex_ids=vids)
                comp.starting_point = starting_point(comp, center, graph, simplex)
                components.append(comp)
    return PatchBody(
        simplex=simplex,
        graph=graph,
        components=components,
        inscribed_center=center,
        inscribed_radius=radius,
        transform=transform,
    )
