"""Projection lattice of C^n: subspaces as orthonormal bases, join/meet by
rank-revealing SVD, and the ascent ``P ↦ P ∨ (VPV* ∧ Q)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FixedPointCheckFailed, InvalidSubspace, NotConverged
from .fixpoint import IterationReport, StabilizationPolicy, iterate_to_fixpoint

RANK_TOL = 1e-10
ANGLE_TOL = 1e-8


def _orthonormalize(vectors: np.ndarray, n: int) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=complex).reshape(n, -1)
    if vectors.shape[1] == 0:
        return np.zeros((n, 0), dtype=complex)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    return u[:, s > RANK_TOL]


@dataclass(frozen=True, eq=False)
class SubspaceProjection:
    """Orthogonal projection ``P = BB*`` stored through its range basis ``B``."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=complex, copy=True)
        if b.ndim != 2 or b.shape[1] > b.shape[0]:
            raise InvalidSubspace(f"basis must be n x r with r <= n, got shape {b.shape}")
        if b.shape[1] and np.linalg.norm(b.conj().T @ b - np.eye(b.shape[1])) > RANK_TOL:
            raise InvalidSubspace("basis columns are not orthonormal")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def span(cls, vectors, n: int | None = None) -> "SubspaceProjection":
        """Subspace spanned by the columns of ``vectors`` (an n x k array)."""
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if n is None:
            n = vectors.shape[0]
        return cls(_orthonormalize(vectors, n))

    @classmethod
    def coordinate(cls, n: int, axes) -> "SubspaceProjection":
        return cls(np.eye(n, dtype=complex)[:, list(axes)])

    @classmethod
    def zero(cls, n: int) -> "SubspaceProjection":
        return cls(np.zeros((n, 0), dtype=complex))

    @classmethod
    def full(cls, n: int) -> "SubspaceProjection":
        return cls(np.eye(n, dtype=complex))

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def excess_angle(self, other: "SubspaceProjection") -> float:
        """Largest principal angle from ``Ran(other)`` to ``Ran(self)``;
        zero exactly when ``other ≤ self``."""
        if other.rank == 0:
            return 0.0
        resid = other.basis - self.basis @ (self.basis.conj().T @ other.basis)
        s = float(np.linalg.norm(resid, 2))
        return math.asin(min(1.0, s))

    def contains(self, other: "SubspaceProjection", tol: float = ANGLE_TOL) -> bool:
        return self.excess_angle(other) <= tol

    def same_as(self, other: "SubspaceProjection", tol: float = ANGLE_TOL) -> bool:
        return self.rank == other.rank and self.contains(other, tol)


def subspace_distance(a: SubspaceProjection, b: SubspaceProjection) -> float:
    """Rank difference plus the larger of the two one-sided principal angles."""
    return abs(a.rank - b.rank) + max(a.excess_angle(b), b.excess_angle(a))


def _check_dims(*subspaces):
    n = subspaces[0].n
    if any(s.n != n for s in subspaces):
        raise DimensionMismatch("subspaces live in different dimensions")


def join(a: SubspaceProjection, b: SubspaceProjection) -> SubspaceProjection:
    _check_dims(a, b)
    return SubspaceProjection(_orthonormalize(np.hstack([a.basis, b.basis]), a.n))


def meet(a: SubspaceProjection, b: SubspaceProjection) -> SubspaceProjection:
    """``Ran(a) ∩ Ran(b)``: the null space of the stacked complements
    ``[(I - P_a); (I - P_b)]``."""
    _check_dims(a, b)
    n = a.n
    if a.rank == 0 or b.rank == 0:
        return SubspaceProjection.zero(n)
    eye = np.eye(n)
    _, s, vh = np.linalg.svd(np.vstack([eye - a.matrix, eye - b.matrix]))
    s = np.concatenate([s, np.zeros(n - s.size)])
    return SubspaceProjection(_orthonormalize(vh[s <= RANK_TOL].conj().T, n))


def conjugate(v: np.ndarray, p: SubspaceProjection) -> SubspaceProjection:
    """``V P V*``, whose range is ``V Ran(P)``."""
    return SubspaceProjection(_orthonormalize(np.asarray(v) @ p.basis, p.n))


@dataclass(frozen=True, eq=False)
class OmlSystem:
    v: np.ndarray
    q: SubspaceProjection
    p0: SubspaceProjection

    def __post_init__(self):
        v = np.array(self.v, dtype=complex, copy=True)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionMismatch(f"V must be square, got shape {v.shape}")
        if np.linalg.norm(v.conj().T @ v - np.eye(len(v))) > RANK_TOL:
            raise InvalidSubspace("V is not unitary")
        if self.q.n != len(v) or self.p0.n != len(v):
            raise DimensionMismatch("V, Q and P0 act on different dimensions")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return len(self.v)


def phi_oml_step(sys: OmlSystem, p: SubspaceProjection) -> SubspaceProjection:
    return join(p, meet(conjugate(sys.v, p), sys.q))


@dataclass(frozen=True)
class OmlCertificate:
    above_seed: float
    above_image: float


def fixed_point_defects(sys: OmlSystem, p: SubspaceProjection) -> OmlCertificate:
    """Principal-angle defects of ``P ≥ P0`` and ``P ≥ VPV* ∧ Q``."""
    return OmlCertificate(
        p.excess_angle(sys.p0), p.excess_angle(meet(conjugate(sys.v, p), sys.q))
    )


def oml_fixed_point(sys: OmlSystem, policy: StabilizationPolicy | None = None) -> IterationReport:
    """Ascend from ``P0`` to the least ``P*`` with ``P* ≥ P0`` and
    ``P* ≥ VP*V* ∧ Q``.

    Every step either raises the rank or stops, so at most ``n`` steps are
    needed. Stability is judged by :func:`subspace_distance` (default
    tolerance: principal angle ``1e-8``).
    """
    if policy is None:
        policy = StabilizationPolicy.numeric(ANGLE_TOL, 0.0, sys.n + 2)
    report = iterate_to_fixpoint(lambda p: phi_oml_step(sys, p), sys.p0, subspace_distance, policy)
    if not report.converged:
        raise NotConverged(
            f"projection ascent did not settle; last subspace distance {report.residuals[-1]:.3e}",
            report,
        )
    cert = fixed_point_defects(sys, report.fixed_point)
    if max(cert.above_seed, cert.above_image) > ANGLE_TOL:
        raise FixedPointCheckFailed(
            f"P* violates a fixed-point inequality (defects {cert.above_seed:.3e}, {cert.above_image:.3e})"
        )
    return IterationReport(
        report.fixed_point, report.stage, report.residuals, True, {"certificate": cert}
    )
