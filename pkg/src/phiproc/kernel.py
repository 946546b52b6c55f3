"""Finite-state Markov kernels and their deterministic lift on distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDistribution,
    NonStochasticKernel,
    NotConverged,
    ParseError,
)
from .fixpoint import DEFAULT_POLICY, IterationReport, StabilizationPolicy, iterate_to_fixpoint

STOCHASTIC_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistribution("a distribution is a nonempty 1-d vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistribution("distribution entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > STOCHASTIC_TOL:
            raise InvalidDistribution(f"distribution sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    def __eq__(self, other):
        return isinstance(other, Distribution) and np.array_equal(self.probs, other.probs)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class Kernel:
    """Row-stochastic matrix; ``rows[x, y]`` is the probability of ``x → y``."""

    rows: np.ndarray

    def __post_init__(self):
        k = _frozen(self.rows)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] == 0:
            raise NonStochasticKernel(f"kernel must be a nonempty square matrix, got shape {k.shape}")
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise NonStochasticKernel("kernel entries must be finite and nonnegative")
        sums = k.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise NonStochasticKernel(f"row {bad[0]} sums to {sums[bad[0]]!r}")
        object.__setattr__(self, "rows", k)

    @classmethod
    def identity(cls, n: int) -> "Kernel":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.rows.shape[0]


def toy_kernel(p: float) -> Kernel:
    """Two states ``a, b``: ``a → b`` surely, ``b → a`` with probability ``p``."""
    return Kernel(np.array([[0.0, 1.0], [p, 1.0 - p]]))


def push_forward(k: Kernel, mu: Distribution) -> Distribution:
    """``μ K`` as a row vector."""
    if k.n != mu.n:
        raise DimensionMismatch(f"kernel on {k.n} states, distribution on {mu.n}")
    return Distribution(mu.probs @ k.rows)


def compose_kernels(kf: Kernel, kg: Kernel) -> Kernel:
    """Kernel of "``kf`` then ``kg``": the matrix product ``kf @ kg``."""
    if kf.n != kg.n:
        raise DimensionMismatch(f"kernels on {kf.n} and {kg.n} states")
    return Kernel(kf.rows @ kg.rows)


def l1(a: Distribution, b: Distribution) -> float:
    return float(np.abs(a.probs - b.probs).sum())


def stationary_distribution(
    k: Kernel,
    policy: StabilizationPolicy = DEFAULT_POLICY,
    start: Distribution | None = None,
) -> IterationReport:
    """Fixed point of the lifted map ``μ ↦ μK`` by power iteration.

    Starts from the uniform distribution unless ``start`` is given. Periodic
    chains that never settle raise :class:`NotConverged` with the report.
    """
    mu0 = Distribution.uniform(k.n) if start is None else start
    report = iterate_to_fixpoint(lambda mu: push_forward(k, mu), mu0, l1, policy)
    if not report.converged:
        raise NotConverged(
            f"power iteration did not settle after {report.stage} steps "
            f"(last L1 residual {report.residuals[-1]:.3e})",
            report,
        )
    return report


# -- text format --------------------------------------------------------------

def parse_kernel(text: str, path: str | None = None) -> Kernel:
    """``n`` on the first data line, then ``n`` rows of ``n`` reals."""
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
                    raise ParseError(f"state count must be positive, got {n}", lineno, path)
                continue
            row = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise ParseError(f"bad number ({exc})", lineno, path) from None
        if len(row) != n:
            raise ParseError(f"expected {n} entries, got {len(row)}", lineno, path)
        if len(rows) == n:
            raise ParseError(f"more than {n} rows", lineno, path)
        rows.append(row)
    if n is None:
        raise ParseError("empty kernel file", None, path)
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, got {len(rows)}", None, path)
    return Kernel(np.array(rows))


def format_kernel(k: Kernel) -> str:
    lines = [str(k.n)] + [" ".join(repr(float(v)) for v in row) for row in k.rows]
    return "\n".join(lines) + "\n"
