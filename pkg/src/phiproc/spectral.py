"""Operator track: spectral filtering to the eigenvalue-1 projection, Riesz
projections by contour quadrature, and diagnostics for Jordan blocks and
alternating projections.

Operators are plain square ``numpy`` arrays (promoted to complex).
Diagnostic distances use the Frobenius norm unless noted; decay rates and
growth statements use the operator 2-norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ContourNearSpectrum,
    DimensionMismatch,
    FixedSpaceMismatch,
    LimitMismatch,
    NonCommutingFamily,
    NonFiniteValue,
    NotConverged,
    NotIdempotent,
    NotNormal,
    ParseError,
    PersistentUnimodularSpectrum,
    PreconditionError,
    SingularResolvent,
)
from .fixpoint import DEFAULT_POLICY, IterationReport, Stage, StabilizationPolicy, iterate_to_fixpoint

EIGEN_ONE_TOL = 1e-8
NORMALITY_TOL = 1e-10
IDEMPOTENT_TOL = 1e-8
UNIMODULAR_TOL = 1e-12
COMMUTE_TOL = 1e-10
PROJECTOR_COMMUTE_TOL = 1e-8


def as_operator(t) -> np.ndarray:
    a = np.array(t, dtype=complex, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"operator must be a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue("operator has non-finite entries")
    a.setflags(write=False)
    return a


def fro(a) -> float:
    return float(np.linalg.norm(a))


def opnorm(a) -> float:
    return float(np.linalg.norm(a, 2))


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Idempotent matrix; ``orthogonal`` is set when it is also Hermitian."""

    entries: np.ndarray

    def __post_init__(self):
        p = as_operator(self.entries)
        defect = fro(p @ p - p)
        if defect > IDEMPOTENT_TOL:
            raise NotIdempotent(f"||P^2 - P|| = {defect:.3e} exceeds {IDEMPOTENT_TOL}")
        object.__setattr__(self, "entries", p)

    @property
    def idempotency_defect(self) -> float:
        p = self.entries
        return fro(p @ p - p)

    @property
    def orthogonal(self) -> bool:
        return fro(self.entries - self.entries.conj().T) <= IDEMPOTENT_TOL

    @property
    def rank(self) -> int:
        # nonzero singular values of an idempotent are >= 1
        return int(np.sum(np.linalg.svd(self.entries, compute_uv=False) > 0.5))


# -- normal operators ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def projector(self, mask) -> np.ndarray:
        v = self.eigenvectors[:, np.asarray(mask, dtype=bool)]
        return v @ v.conj().T


def commutator_defect(a, b) -> float:
    return fro(a @ b - b @ a)


def is_normal(t) -> bool:
    t = as_operator(t)
    scale = max(opnorm(t) ** 2, np.finfo(float).tiny)
    return commutator_defect(t, t.conj().T) <= NORMALITY_TOL * scale


def normal_decomposition(t) -> SpectralDecomposition:
    """Unitary eigendecomposition via the complex Schur form, which is
    diagonal for normal matrices and keeps degenerate eigenspaces orthonormal."""
    t = as_operator(t)
    if not is_normal(t):
        raise NotNormal(f"||TT* - T*T|| = {commutator_defect(t, t.conj().T):.3e}")
    r, z = scipy.linalg.schur(t, output="complex")
    dec = SpectralDecomposition(np.diag(r).copy(), z)
    scale = max(1.0, opnorm(t))
    if fro(dec.reconstruct() - t) > 1e-10 * scale or fro(z.conj().T @ z - np.eye(len(z))) > 1e-10:
        raise NotNormal("Schur form is not diagonal to working precision")
    return dec


@dataclass(frozen=True)
class SpectralFilter:
    """Averaging filter ``g(λ) = 1 + β(λ - 1) = (1 - β) + βλ``."""

    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise PreconditionError(f"beta must lie in (0, 1], got {self.beta}")

    def __call__(self, lam):
        return 1.0 + self.beta * (np.asarray(lam) - 1.0)

    def matrix(self, t) -> np.ndarray:
        t = as_operator(t)
        return np.eye(len(t)) + self.beta * (t - np.eye(len(t)))


@dataclass(frozen=True, eq=False)
class SpectralStabilization:
    report: IterationReport
    iterative_limit: np.ndarray
    analytic_limit: ProjectionOperator
    iterations: int
    contraction_bound: float
    observed_ratio: float | None
    decomposition: SpectralDecomposition

    @property
    def limit_gap(self) -> float:
        return fro(self.iterative_limit - self.analytic_limit.entries)


def eigenvalue_one_mask(eigenvalues, scale: float = 1.0) -> np.ndarray:
    return np.abs(np.asarray(eigenvalues) - 1.0) <= EIGEN_ONE_TOL * max(1.0, scale)


def _decay_ratio(history, floor=1e-9) -> float | None:
    h = np.asarray(history)
    if h.size == 0 or h[0] == 0:
        return None
    usable = np.flatnonzero(h > floor * h[0])
    # the first drop below the floor ends the usable stretch
    stop = usable.size
    for i, idx in enumerate(usable):
        if idx != i:
            stop = i
            break
    usable = usable[:stop]
    if usable.size < 2:
        return float(h[1] / h[0]) if h.size > 1 else None
    tail = usable[-min(usable.size, 50):]
    slope = np.polyfit(tail, np.log(h[tail]), 1)[0]
    return float(math.exp(slope))


def stabilize_normal(
    t,
    filt: SpectralFilter = SpectralFilter(),
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> SpectralStabilization:
    """Iterate ``g(T)^n`` to its limit and compare with the analytic
    eigenvalue-1 projection ``E({1})``.

    The driver's residual is ``||A_{n+1} - A_n||_F / (1 - r)`` with
    ``r = max_{λ≠1} |g(λ)|``; for a normal operator that bounds the distance
    of ``A_n`` to ``E({1})``, so the policy tolerance is a tolerance on the
    limit itself. The returned report carries the stage label ``omega`` and
    the history ``||g(T)^n - E({1})||_2``.
    """
    t = as_operator(t)
    dec = normal_decomposition(t)
    lam = dec.eigenvalues
    ones = eigenvalue_one_mask(lam, opnorm(t))
    g = np.abs(filt(lam))
    offending = (~ones) & (g >= 1.0 - UNIMODULAR_TOL)
    if np.any(offending):
        bad = lam[offending][0]
        raise PersistentUnimodularSpectrum(
            f"eigenvalue {bad:.6g} has |g| = {abs(filt(bad)):.12g}; no stabilization at the first limit stage"
        )
    r = float(g[~ones].max()) if np.any(~ones) else 0.0
    e1 = dec.projector(ones)
    gmat = filt.matrix(t)
    n = len(t)
    history = [opnorm(np.eye(n) - e1)]

    def step(a):
        nxt = gmat @ a
        history.append(opnorm(nxt - e1))
        return nxt

    scale = 1.0 / (1.0 - r)
    report = iterate_to_fixpoint(
        step, np.eye(n, dtype=complex), lambda a, b: fro(a - b) * scale, policy
    )
    if not report.converged:
        raise NotConverged(f"g(T)^n did not stabilize within {policy.max_iter} steps", report)
    limit = report.fixed_point
    iterations = report.stage.index
    projection = ProjectionOperator(e1)
    history = history[: iterations + 1]
    gap = fro(limit - e1)
    if gap > 1e-8:
        raise LimitMismatch(f"iterative and analytic limits differ by {gap:.3e}")
    omega = IterationReport(projection.entries, Stage.OMEGA, tuple(history), True,
                            {"finite_stage": iterations, "driver_residuals": report.residuals})
    return SpectralStabilization(
        omega, limit, projection, iterations, r, _decay_ratio(history), dec
    )


# -- Riesz projections -----------------------------------------------------------

@dataclass(frozen=True)
class RieszContour:
    center: complex = 1.0
    radius: float = 0.1
    nodes: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise PreconditionError(f"contour radius must be positive, got {self.radius}")
        if self.nodes < 16:
            raise PreconditionError(f"contour needs at least 16 nodes, got {self.nodes}")

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and trapezoid weights for ``(1/2πi)∮ f(ζ) dζ``."""
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        w = self.radius * np.exp(1j * theta)
        return self.center + w, w / self.nodes

    def doubled(self) -> "RieszContour":
        return RieszContour(self.center, self.radius, 2 * self.nodes)


def default_contour(t, nodes: int = 64) -> RieszContour:
    """Circle about 1 with radius a tenth of the spectral gap.

    Eigenvalues within 1e-3 of 1 are treated as the enclosed cluster when
    estimating the gap, so rounding-split Jordan eigenvalues stay inside.
    """
    d = np.abs(np.linalg.eigvals(as_operator(t)) - 1.0)
    cluster = d <= 1e-3
    spread = float(d[cluster].max()) if np.any(cluster) else 0.0
    if not np.any(~cluster):
        return RieszContour(1.0, 0.5, nodes)
    gap = float(d[~cluster].min())
    radius = 0.1 * gap if 0.1 * gap > 2 * spread else 0.5 * (spread + gap)
    return RieszContour(1.0, radius, nodes)


def riesz_projection(t, contour: RieszContour | None = None) -> ProjectionOperator:
    """Trapezoid-rule approximation of ``(1/2πi)∮ (ζI - T)^{-1} dζ``."""
    t = as_operator(t)
    if contour is None:
        contour = default_contour(t)
    n = len(t)
    eig = np.linalg.eigvals(t)
    clearance = np.abs(np.abs(eig - contour.center) - contour.radius)
    if clearance.min() <= 10 * np.finfo(float).eps * opnorm(t):
        raise ContourNearSpectrum(
            f"eigenvalue {eig[clearance.argmin()]:.6g} lies on the contour |z - {contour.center}| = {contour.radius}"
        )
    zetas, weights = contour.points()
    eye = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for zeta, w in zip(zetas, weights):
        shifted = zeta * eye - t
        if np.linalg.cond(shifted) > 1.0 / np.finfo(float).eps:
            raise SingularResolvent(f"resolvent is singular at node {zeta:.6g}")
        try:
            acc += w * np.linalg.solve(shifted, eye)
        except np.linalg.LinAlgError:
            raise SingularResolvent(f"resolvent is singular at node {zeta:.6g}") from None
    return ProjectionOperator(acc)


def null_space_dim(a, tol: float = 1e-8) -> int:
    a = np.atleast_2d(np.asarray(a))
    s = np.linalg.svd(a, compute_uv=False)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    return int(a.shape[1] - np.sum(s > tol * scale))


def joint_fixed_dim(ts) -> int:
    """Dimension of ``⋂ Fix(T_i)`` from the null space of stacked ``T_i - I``."""
    n = len(ts[0])
    return null_space_dim(np.vstack([np.asarray(t) - np.eye(n) for t in ts]))


@dataclass(frozen=True, eq=False)
class RieszProduct:
    projection: ProjectionOperator
    factors: tuple[ProjectionOperator, ...]
    rank: int
    fixed_dim: int
    max_probe_residual: float

    @property
    def range_matches(self) -> bool:
        return self.rank == self.fixed_dim and self.max_probe_residual <= 1e-8


def product_of_riesz(
    ts,
    contours=None,
    probes: int = 100,
    seed: int = 0,
    strict: bool = True,
) -> RieszProduct:
    """Ordered product ``P_1 P_2 ... P_k`` of the eigenvalue-1 Riesz
    projections of a commuting family, with its range checked against the
    joint fixed space.

    With ``strict`` a range mismatch (e.g. a Jordan block at 1, whose Riesz
    projection covers the generalized eigenspace) raises
    :class:`FixedSpaceMismatch`; otherwise it is only reported.
    """
    ts = [as_operator(t) for t in ts]
    if not ts:
        raise DimensionMismatch("empty operator family")
    n = len(ts[0])
    if any(len(t) != n for t in ts):
        raise DimensionMismatch("operators in the family differ in dimension")
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            scale = max(1.0, opnorm(ts[i]) * opnorm(ts[j]))
            d = commutator_defect(ts[i], ts[j])
            if d > COMMUTE_TOL * scale:
                raise NonCommutingFamily(f"||T{i}T{j} - T{j}T{i}|| = {d:.3e}")
    if contours is None:
        contours = [None] * len(ts)
    elif isinstance(contours, RieszContour):
        contours = [contours] * len(ts)
    if len(contours) != len(ts):
        raise DimensionMismatch("one contour per operator is required")
    factors = tuple(riesz_projection(t, c) for t, c in zip(ts, contours))
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            d = commutator_defect(factors[i].entries, factors[j].entries)
            if d > PROJECTOR_COMMUTE_TOL:
                raise NonCommutingFamily(f"Riesz projections {i} and {j} fail to commute ({d:.3e})")
    p = factors[0].entries
    for f in factors[1:]:
        p = p @ f.entries
    projection = ProjectionOperator(p)

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, probes)) + 1j * rng.standard_normal((n, probes))
    x /= np.linalg.norm(x, axis=0)
    px = p @ x
    residual = max(float(np.linalg.norm(t @ px - px, axis=0).max()) for t in ts)
    result = RieszProduct(projection, factors, projection.rank, joint_fixed_dim(ts), residual)
    if strict and not result.range_matches:
        raise FixedSpaceMismatch(
            f"range of the product has rank {result.rank} but the joint fixed space has "
            f"dimension {result.fixed_dim} (probe residual {residual:.3e})"
        )
    return result


# -- nonnormal / noncommuting diagnostics ------------------------------------------

def jordan_block(k: int, eigenvalue: complex = 1.0) -> np.ndarray:
    return eigenvalue * np.eye(k) + np.eye(k, k=1)


@dataclass(frozen=True)
class JordanGrowth:
    k: int
    ns: tuple[int, ...]
    norms: tuple[float, ...]
    slope: float


def jordan_power(k: int, n: int) -> np.ndarray:
    """``J_k^n = Σ_{j<k} C(n, j) N^j`` with ``N`` the shift."""
    out = np.zeros((k, k))
    for j in range(k):
        out += math.comb(n, j) * np.eye(k, k=j)
    return out


def jordan_growth(k: int, n_max: int, norm: str = "fro") -> JordanGrowth:
    """Norms of ``J_k^n`` for ``n = 1..n_max`` and the log-log slope fitted
    over the last decade ``[n_max/10, n_max]``."""
    if k < 1:
        raise PreconditionError(f"block size must be positive, got {k}")
    if n_max < 100:
        raise PreconditionError(f"n_max must be at least 100, got {n_max}")
    ns = np.arange(1, n_max + 1)
    if norm == "fro":
        # entry C(n, j) occurs on the j-th superdiagonal, k - j times
        norms = [math.sqrt(sum((k - j) * math.comb(int(n), j) ** 2 for j in range(k))) for n in ns]
    elif norm == "2":
        norms = [opnorm(jordan_power(k, int(n))) for n in ns]
    else:
        raise PreconditionError(f"unknown norm {norm!r}")
    norms = np.asarray(norms, dtype=float)
    window = ns >= n_max // 10
    slope = float(np.polyfit(np.log(ns[window]), np.log(norms[window]), 1)[0])
    return JordanGrowth(k, tuple(int(n) for n in ns), tuple(norms.tolist()), slope)


@dataclass(frozen=True)
class AlternatingTrace:
    theta: float
    distance_to_meet: tuple[float, ...]
    distance_to_candidate: tuple[float, ...]
    candidate_idempotency_defect: float
    converged_to_meet: bool

    @property
    def supports_divergence_claim(self) -> bool:
        return not self.converged_to_meet


def two_plane_projections(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """``P`` onto span{e1, e2} and ``Q`` onto span{cosθ e1 + sinθ e3, e2} in R^3."""
    p = np.diag([1.0, 1.0, 0.0])
    u = np.array([math.cos(theta), 0.0, math.sin(theta)])
    q = np.outer(u, u) + np.diag([0.0, 1.0, 0.0])
    return p, q


def _intersection_projector(p, q, tol=1e-10) -> np.ndarray:
    n = len(p)
    _, s, vh = np.linalg.svd(np.vstack([p - np.eye(n), q - np.eye(n)]))
    s = np.concatenate([s, np.zeros(n - s.size)])
    basis = vh[s <= tol].conj().T
    return basis @ basis.conj().T


def alternating_projections(theta: float, n_max: int = 100) -> AlternatingTrace:
    """Trace ``(QP)^n`` for ``n = 1..n_max`` against two candidate limits: the
    projector onto ``Ran P ∩ Ran Q`` and the far iterate ``(QP)^{n_max}``.

    Nothing is asserted about convergence; the trace is the result.
    """
    if not 0.0 <= theta < math.pi / 2:
        raise PreconditionError(f"theta must lie in [0, pi/2), got {theta}")
    if n_max < 1:
        raise PreconditionError("n_max must be positive")
    p, q = two_plane_projections(theta)
    qp = q @ p
    meet = _intersection_projector(p, q)
    powers = [qp]
    for _ in range(n_max - 1):
        powers.append(qp @ powers[-1])
    candidate = powers[-1]
    to_meet = tuple(opnorm(a - meet) for a in powers)
    to_candidate = tuple(opnorm(a - candidate) for a in powers)
    return AlternatingTrace(
        theta,
        to_meet,
        to_candidate,
        opnorm(candidate @ candidate - candidate),
        to_meet[-1] <= 1e-8,
    )


# -- text format -------------------------------------------------------------------

def _parse_complex(tok: str) -> complex:
    tok = tok.strip()
    if tok.endswith("i"):
        tok = tok[:-1] + "j"
    return complex(tok)


def parse_matrix(text: str, path: str | None = None) -> np.ndarray:
    """``n`` then ``n`` rows of ``n`` complex tokens such as ``1``, ``-0.5j``,
    ``0.3+0.4j``."""
    rows = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if n is None:
                n = int(line)
                if n < 1:
                    raise ParseError(f"dimension must be positive, got {n}", lineno, path)
                continue
            row = [_parse_complex(tok) for tok in line.split()]
        except ValueError as exc:
            raise ParseError(f"bad complex token ({exc})", lineno, path) from None
        if len(row) != n:
            raise ParseError(f"expected {n} entries, got {len(row)}", lineno, path)
        if len(rows) == n:
            raise ParseError(f"more than {n} rows", lineno, path)
        rows.append(row)
    if n is None:
        raise ParseError("empty matrix file", None, path)
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, got {len(rows)}", None, path)
    return np.array(rows, dtype=complex)


def format_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}j"


def format_matrix(a) -> str:
    a = np.asarray(a, dtype=complex)
    lines = [str(len(a))] + [" ".join(format_complex(z) for z in row) for row in a]
    return "\n".join(lines) + "\n"
