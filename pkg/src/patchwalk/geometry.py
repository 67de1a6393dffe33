"""Transforms between budget-constrained weight space and the unit sphere.

A long-only portfolio lives on the canonical simplex in R^{d+1}; the set of
portfolios with a fixed variance ``x' S x = c`` is the slice of an ellipsoid
by the budget hyperplane.  This module builds the affine change of variables
that sends that slice to the unit sphere in R^d and the simplex to a
full-dimensional simplex in half-space form, so all sampling and volume
machinery can work on ``sphere intersect simplex``.

Construction: reduce the hyperplane to R^d with a fixed orthonormal basis of
the zero-sum direction space, recenter at the minimum-variance point of the
hyperplane (where the slice ellipsoid is centered), and whiten with the
symmetric square root of the reduced covariance.  The norm of the image
encodes the variance monotonically:

    ||y||^2 = (x' S x - v_min) / (c - v_min),

with v_min = 1 / (1' S^-1 1) the hyperplane's minimum variance, so ||y|| = 1
exactly on the target level.  Levels at or below v_min do not touch the
hyperplane in a full-dimensional way and are rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLevel, NotPositiveDefinite, OffSimplexAffineHull
from .topology import SimplexH

# Relative eigenvalue floor under which a covariance counts as singular.
PD_GATE = 1e-10
# Budget-sum tolerance for points claimed to be on the hyperplane.
HULL_TOL = 1e-9


@dataclass(frozen=True)
class CanonicalSimplex:
    """The set ``{x in R^{d_assets} : x_i >= 0, sum x_i = 1}``, by definition.

    Carries no coefficients: the set is identified by its dimension alone.
    """

    d_assets: int

    def __post_init__(self):
        if self.d_assets < 2:
            raise ValueError("need at least two assets")

    def contains(self, x: np.ndarray, tol: float = HULL_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)

    def barycenter(self) -> np.ndarray:
        return np.full(self.d_assets, 1.0 / self.d_assets)

    def vertices(self) -> np.ndarray:
        return np.eye(self.d_assets)


@dataclass(frozen=True)
class VolatilityEllipsoid:
    """Level set ``{x : x' sigma x = level}`` of a positive-definite form."""

    sigma: np.ndarray
    level: float

    def __post_init__(self):
        sig = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", sig)
        scale = np.max(np.abs(sig)) or 1.0
        if np.max(np.abs(sig - sig.T)) > 1e-12 * scale:
            raise NotPositiveDefinite("covariance is not symmetric at 1e-12 relative")
        eig = np.linalg.eigvalsh(sig)
        if eig[0] <= PD_GATE * eig[-1] or eig[-1] <= 0.0:
            raise NotPositiveDefinite(
                f"smallest eigenvalue {eig[0]:.3e} below gate {PD_GATE:.0e} * {eig[-1]:.3e}"
            )
        if not self.level > 0.0:
            raise DegenerateLevel(f"variance level must be positive, got {self.level}")


@dataclass(frozen=True)
class PatchTransform:
    """Invertible map between the budget hyperplane and R^d.

    Immutable after construction and safe to share across threads; both map
    directions are pure functions.

    Attributes
    ----------
    basis : (d, d_assets) orthonormal rows spanning zero-sum directions.
    offset : minimum-variance point of the budget hyperplane (may have
        negative coordinates); the image of the origin under the inverse map.
    whitening / whitening_inv : symmetric d x d maps between recentered
        hyperplane coordinates and sphere coordinates.
    level : the target variance c; min_variance : v_min of the hyperplane.
    simplex : image of the canonical simplex, in half-space form.
    """

    basis: np.ndarray
    offset: np.ndarray
    whitening: np.ndarray
    whitening_inv: np.ndarray
    level: float
    min_variance: float
    simplex: SimplexH

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def d_assets(self) -> int:
        return self.basis.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis": self.basis.tolist(),
                "offset": self.offset.tolist(),
                "whitening": self.whitening.tolist(),
                "level": self.level,
                "min_variance": self.min_variance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PatchTransform":
        doc = json.loads(text)
        basis = np.asarray(doc["basis"], dtype=float)
        whitening = np.asarray(doc["whitening"], dtype=float)
        whitening_inv = np.linalg.inv(whitening)
        offset = np.asarray(doc["offset"], dtype=float)
        simplex = _simplex_image(basis, offset, whitening_inv)
        return cls(
            basis=basis,
            offset=offset,
            whitening=whitening,
            whitening_inv=whitening_inv,
            level=float(doc["level"]),
            min_variance=float(doc["min_variance"]),
            simplex=simplex,
        )


def _direction_basis(d_assets: int) -> np.ndarray:
    """Deterministic orthonormal basis of the zero-sum subspace, as rows.

    Householder QR of the fixed direction matrix [e_2-e_1, ..., e_n-e_1];
    column signs are normalized so the result is platform-independent.
    """
    d = d_assets - 1
    D = np.zeros((d_assets, d))
    D[0, :] = -1.0
    D[np.arange(1, d_assets), np.arange(d)] = 1.0
    Q, R = np.linalg.qr(D)
    signs = np.sign(np.diag(R))
    signs[signs == 0.0] = 1.0
    return (Q * signs[None, :]).T


def _simplex_image(basis, offset, whitening_inv) -> SimplexH:
    # x_i >= 0 pulls back to -(W^-1 B)_:,i . y <= offset_i exactly.
    WB = whitening_inv @ basis
    return SimplexH(A=-WB.T, b=offset.copy())


def build_transform(sigma: np.ndarray, level: float, d_assets: int) -> PatchTransform:
    """Build the transform for covariance ``sigma`` and variance target ``level``.

    Raises NotPositiveDefinite when the covariance fails the eigenvalue gate
    and DegenerateLevel when the level is non-positive or does not exceed the
    hyperplane's minimum variance (the slice is empty or a single point).
    Whether the sphere actually meets the image simplex is not checked here.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (d_assets, d_assets):
        raise NotPositiveDefinite(
            f"covariance shape {sigma.shape} does not match d_assets={d_assets}"
        )
    if d_assets < 3:
        raise ValueError("need d_assets >= 3 for a non-trivial patch")
    ell = VolatilityEllipsoid(sigma=sigma, level=level)  # validates PD and level > 0

    ones = np.ones(d_assets)
    sol = np.linalg.solve(ell.sigma, ones)
    v_min = 1.0 / float(ones @ sol)
    offset = sol * v_min  # minimum-variance point of the hyperplane
    chat = level - v_min
    if chat <= 1e-12 * level:
        raise DegenerateLevel(
            f"level {level:.6g} does not exceed the hyperplane minimum variance "
            f"{v_min:.6g}; the slice is empty or a single point"
        )

    B = _direction_basis(d_assets)
    reduced = B @ ell.sigma @ B.T
    eigval, eigvec = np.linalg.eigh(reduced)
    if eigval[0] <= PD_GATE * eigval[-1]:
        raise NotPositiveDefinite("reduced covariance fails the eigenvalue gate")
    sq = np.sqrt(eigval / chat)
    whitening = (eigvec * sq[None, :]) @ eigvec.T
    whitening_inv = (eigvec / sq[None, :]) @ eigvec.T

    return PatchTransform(
        basis=B,
        offset=offset,
        whitening=whitening,
        whitening_inv=whitening_inv,
        level=float(level),
        min_variance=v_min,
        simplex=_simplex_image(B, offset, whitening_inv),
    )


def to_patch(x: np.ndarray, transform: PatchTransform) -> np.ndarray:
    """Map weights on the budget hyperplane to sphere coordinates.

    The image has unit norm exactly when ``x' S x`` equals the transform's
    level; off-level points map off the sphere (allowed, callers check).
    Accepts a single vector or a batch of rows.
    """
    x = np.asarray(x, dtype=float)
    sums = x.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > HULL_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise OffSimplexAffineHull(f"weights sum off by {worst:.3e} (> {HULL_TOL:.0e})")
    return (x - transform.offset) @ transform.basis.T @ transform.whitening.T


def from_patch(y: np.ndarray, transform: PatchTransform) -> np.ndarray:
    """Map sphere coordinates back to weights.

    Output rows sum to one by construction.  Unit-norm points inside the
    image simplex come back long-only with variance equal to the level;
    points outside come back with some negative weight (callers flag them).
    """
    y = np.asarray(y, dtype=float)
    return transform.offset + y @ transform.whitening_inv.T @ transform.basis
