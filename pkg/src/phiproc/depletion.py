"""Intact vs. projected recursions ``x_{n+1} = B(x_n + E s_n)`` on R^m_+.

The projected ("circ") run feeds ``E P_F s_n``, where ``P_F`` zeroes the
coordinates in the removed set ``F``. Both runs always share one stimulus
realization, so the gap ``Δ_n = x_n^intact - x_n^circ`` compares
trajectories under the same input.

Config files are flat TOML; see :func:`parse_config` for the keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import (
    BoundHypothesisViolated,
    CouplingViolated,
    DimensionMismatch,
    DivergedIteration,
    IndexOutOfRange,
    InsufficientTail,
    InvalidConfig,
    KappaDeclarationViolated,
    NonFiniteValue,
    NonPositiveStimulus,
    NotConverged,
    ParseError,
    PreconditionError,
)
from .fixpoint import DEFAULT_POLICY, StabilizationPolicy, iterate_to_fixpoint

COUPLING_TOL = 1e-12
CLOSED_FORM_TOL = 1e-9
DIVERGENCE_LIMIT = 1e12


# -- updates -----------------------------------------------------------------------

@dataclass(frozen=True)
class LinearUpdate:
    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InvalidConfig(f"rho must lie in (0, 1), got {self.rho}")

    def __call__(self, z):
        return self.rho * z

    @property
    def kappa(self) -> float:
        return self.rho


@dataclass(frozen=True, eq=False)
class NonlinearUpdate:
    """Monotone update with a declared incremental lower bound
    ``B(x + w) - B(x) ⪰ κ w`` for ``w ⪰ 0``."""

    fn: Callable[[np.ndarray], np.ndarray]
    kappa: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise InvalidConfig(f"kappa must lie in (0, 1], got {self.kappa}")

    def __call__(self, z):
        return np.asarray(self.fn(z), dtype=float)


def tanh_update(rho: float, gain: float, kappa: float | None = None) -> NonlinearUpdate:
    """``B(z) = ρz + gain·tanh(z)``; increments dominate ``ρw`` since tanh is nondecreasing."""
    return NonlinearUpdate(
        lambda z: rho * z + gain * np.tanh(z),
        rho if kappa is None else kappa,
        "tanh",
        {"rho": rho, "tanh_gain": gain},
    )


def saturating_update(cap: float, kappa: float, rho: float = 1.0) -> NonlinearUpdate:
    """``B(z) = min(ρz, cap)``; flat above the cap, so any ``κ > 0`` is a false declaration."""
    return NonlinearUpdate(
        lambda z: np.minimum(rho * z, cap), kappa, "saturating", {"cap": cap, "rho": rho}
    )


Update = Union[LinearUpdate, NonlinearUpdate]


# -- stimuli -----------------------------------------------------------------------

def _nonneg_vector(v, what: str) -> np.ndarray:
    arr = np.array(v, dtype=float, copy=True)
    if arr.ndim != 1:
        raise InvalidConfig(f"{what} must be a vector")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise NonPositiveStimulus(f"{what} must be finite and entrywise nonnegative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Constant:
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", _nonneg_vector(self.s, "stimulus"))

    vectors = property(lambda self: (self.s,))

    def realize(self, steps: int):
        return np.broadcast_to(self.s, (steps, self.s.size)), np.ones(steps, dtype=bool)


@dataclass(frozen=True, eq=False)
class _Evented:
    """``s_t = base + δ·event`` at event times, ``base`` otherwise."""

    base: np.ndarray
    event: np.ndarray
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "base", _nonneg_vector(self.base, "stimulus base"))
        object.__setattr__(self, "event", _nonneg_vector(self.event, "stimulus event"))
        if self.base.size != self.event.size:
            raise DimensionMismatch("stimulus base and event differ in length")
        if not self.delta >= 0 or not math.isfinite(self.delta):
            raise NonPositiveStimulus(f"delta must be nonnegative, got {self.delta}")

    vectors = property(lambda self: (self.base, self.event))

    def fired(self, steps: int) -> np.ndarray:
        raise NotImplementedError

    def realize(self, steps: int):
        fired = self.fired(steps)
        s = self.base + np.outer(fired, self.delta * self.event)
        return s, fired


@dataclass(frozen=True, eq=False)
class Periodic(_Evented):
    period: int = 1

    def __post_init__(self):
        super().__post_init__()
        if int(self.period) != self.period or self.period < 1:
            raise InvalidConfig(f"period must be a positive integer, got {self.period}")

    def fired(self, steps):
        t = np.arange(steps)
        return (t > 0) & (t % self.period == 0)


@dataclass(frozen=True, eq=False)
class Bernoulli(_Evented):
    """Independent events with probability ``p`` per step, drawn as
    ``rng.random() < p`` from ``numpy.random.default_rng(seed)``."""

    p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 <= self.p <= 1.0:
            raise InvalidConfig(f"event probability must lie in [0, 1], got {self.p}")

    def fired(self, steps):
        return np.random.default_rng(self.seed).random(steps) < self.p


@dataclass(frozen=True, eq=False)
class BoundedGap(_Evented):
    """Events whose spacing never exceeds ``max_gap + 1`` steps.

    ``adversarial`` places them exactly ``max_gap + 1`` apart (the sparsest
    admissible stream); otherwise spacings are uniform on
    ``1..max_gap + 1``.
    """

    max_gap: int = 0
    seed: int = 0
    adversarial: bool = False

    def __post_init__(self):
        super().__post_init__()
        if int(self.max_gap) != self.max_gap or self.max_gap < 0:
            raise InvalidConfig(f"max_gap must be a nonnegative integer, got {self.max_gap}")

    def fired(self, steps):
        out = np.zeros(steps, dtype=bool)
        span = self.max_gap + 1
        if self.adversarial:
            out[span - 1::span] = True
            return out
        rng = np.random.default_rng(self.seed)
        t = int(rng.integers(0, span))
        while t < steps:
            out[t] = True
            t += int(rng.integers(1, span + 1))
        return out


Stimulus = Union[Constant, Periodic, Bernoulli, BoundedGap]


# -- config --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DepletionConfig:
    dim: int
    embedding: np.ndarray
    removed_set: frozenset
    update: Update
    utility_weights: np.ndarray
    stimulus: Stimulus

    def __post_init__(self):
        m = self.dim
        if int(m) != m or m < 1:
            raise InvalidConfig(f"dim must be a positive integer, got {m}")
        e = np.array(self.embedding, dtype=float, copy=True)
        if e.shape != (m, m):
            raise DimensionMismatch(f"embedding must be {m}x{m}, got shape {e.shape}")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise InvalidConfig("embedding must be entrywise nonnegative")
        e.setflags(write=False)
        object.__setattr__(self, "embedding", e)
        removed = frozenset(int(i) for i in self.removed_set)
        _check_indices(removed, m)
        object.__setattr__(self, "removed_set", removed)
        w = np.array(self.utility_weights, dtype=float, copy=True)
        if w.shape != (m,):
            raise DimensionMismatch(f"utility_weights must have length {m}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidConfig("utility_weights must be entrywise nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "utility_weights", w)
        if not isinstance(self.update, (LinearUpdate, NonlinearUpdate)):
            raise InvalidConfig("update must be a LinearUpdate or NonlinearUpdate")
        for vec in self.stimulus.vectors:
            if vec.size != m:
                raise DimensionMismatch(f"stimulus vectors must have length {m}")

    @property
    def order_reflecting(self) -> bool:
        return bool(np.all(self.utility_weights > 0))

    @property
    def f_detectable(self) -> bool:
        cols = sorted(self.removed_set)
        return bool(cols) and bool(np.any(self.embedding[:, cols] > 0))

    @property
    def f_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim)
        mask[sorted(self.removed_set)] = 1.0
        return mask

    def utility(self, x) -> float:
        return float(self.utility_weights @ np.asarray(x))

    def replace(self, **changes) -> "DepletionConfig":
        fields = dict(
            dim=self.dim,
            embedding=self.embedding,
            removed_set=self.removed_set,
            update=self.update,
            utility_weights=self.utility_weights,
            stimulus=self.stimulus,
        )
        fields.update(changes)
        return DepletionConfig(**fields)


def _check_indices(indices, m):
    for i in indices:
        if not 0 <= i < m:
            raise IndexOutOfRange(f"coordinate {i} outside 0..{m - 1}")


def project_F(s, removed_set) -> np.ndarray:
    """Zero the coordinates listed in ``removed_set``."""
    out = np.array(s, dtype=float, copy=True)
    idx = sorted(int(i) for i in removed_set)
    _check_indices(idx, out.size)
    out[idx] = 0.0
    return out


def two_site_config() -> DepletionConfig:
    """Two sites, identity embedding, ρ = 0.8, constant stimulus (1, 0.5), second coordinate removed."""
    return DepletionConfig(
        dim=2,
        embedding=np.eye(2),
        removed_set=frozenset({1}),
        update=LinearUpdate(0.8),
        utility_weights=np.ones(2),
        stimulus=Constant(np.array([1.0, 0.5])),
    )


def blind_embedding_config(stimulus: Stimulus | None = None) -> DepletionConfig:
    """Embedding that integrates only over the kept site, so ``E ∘ P_F = E``."""
    if stimulus is None:
        stimulus = Bernoulli(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1.0, p=0.5, seed=0)
    return DepletionConfig(
        dim=2,
        embedding=np.array([[1.0, 0.0], [0.0, 0.0]]),
        removed_set=frozenset({1}),
        update=LinearUpdate(0.5),
        utility_weights=np.ones(2),
        stimulus=stimulus,
    )


# -- simulation ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GapReport:
    intact_fixed: np.ndarray
    circ_fixed: np.ndarray
    gap_vector: np.ndarray
    utility_gap: float
    bound_value: float | None = None
    bound_satisfied: bool | None = None
    bound_kind: str | None = None
    observed: float | None = None
    steps: int = 0
    details: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Trajectory:
    intact: np.ndarray   # (steps + 1, m), row 0 is x_0 = 0
    circ: np.ndarray
    fired: np.ndarray    # event flag per input time t = 0..steps-1
    gaps: np.ndarray     # d_t = E s_t - E P_F s_t

    @property
    def delta(self) -> np.ndarray:
        return self.intact - self.circ


def _check_state(x, n):
    if not np.all(np.isfinite(x)) or np.abs(x).max(initial=0.0) > DIVERGENCE_LIMIT:
        raise DivergedIteration(f"state left the bounded region at step {n}")


def _check_coupling(x, y, n):
    slack = COUPLING_TOL * max(1.0, float(np.abs(x).max(initial=0.0)))
    if np.any(x - y < -slack):
        raise CouplingViolated(f"intact state fell below the projected state at step {n}")


def simulate(config: DepletionConfig, steps: int) -> Trajectory:
    """Advance both recursions in lockstep for ``steps`` inputs."""
    if steps < 1:
        raise PreconditionError("steps must be positive")
    s, fired = config.stimulus.realize(steps)
    e = config.embedding
    drive_intact = s @ e.T
    drive_circ = (s * (1.0 - config.f_mask)) @ e.T
    b = config.update
    m = config.dim
    intact = np.zeros((steps + 1, m))
    circ = np.zeros((steps + 1, m))
    x = np.zeros(m)
    y = np.zeros(m)
    for t in range(steps):
        x = b(x + drive_intact[t])
        y = b(y + drive_circ[t])
        _check_state(x, t + 1)
        _check_state(y, t + 1)
        _check_coupling(x, y, t + 1)
        intact[t + 1] = x
        circ[t + 1] = y
    return Trajectory(intact, circ, fired, drive_intact - drive_circ)


def _report_from(config, x, y, **kw) -> GapReport:
    gap = x - y
    if np.any(gap < -CLOSED_FORM_TOL):
        raise CouplingViolated("gap vector has a negative entry")
    return GapReport(x.copy(), y.copy(), gap, config.utility(gap), **kw)


def run_pair(
    config: DepletionConfig,
    steps: int = 10_000,
    policy: StabilizationPolicy = DEFAULT_POLICY,
) -> GapReport:
    """Run intact and projected recursions from ``x_0 = 0``.

    A constant stimulus makes the joint map autonomous; it is then iterated
    to its fixed point under ``policy`` (``steps`` is ignored) and, for a
    linear update, checked against ``(ρ/(1-ρ)) E s``. Any other stimulus is
    simulated for ``steps`` inputs and the final states are reported.
    """
    if not isinstance(config.stimulus, Constant):
        traj = simulate(config, steps)
        return _report_from(config, traj.intact[-1], traj.circ[-1], steps=steps)

    m = config.dim
    e, b = config.embedding, config.update
    s = config.stimulus.s
    u_intact = e @ s
    u_circ = e @ project_F(s, config.removed_set)
    counter = [0]

    def step(z):
        x, y = z[:m], z[m:]
        nx, ny = b(x + u_intact), b(y + u_circ)
        counter[0] += 1
        _check_state(nx, counter[0])
        _check_state(ny, counter[0])
        _check_coupling(nx, ny, counter[0])
        return np.concatenate([nx, ny])

    if isinstance(b, LinearUpdate):
        # for x -> ρx + c, ||x_n - x*|| = ||x_{n+1} - x_n|| / (1 - ρ)
        scale = 1.0 / (1.0 - b.rho)
        metric = lambda a, c: float(np.abs(a - c).max()) * scale
    else:
        metric = lambda a, c: float(np.abs(a - c).max())
    try:
        it = iterate_to_fixpoint(step, np.zeros(2 * m), metric, policy)
    except NonFiniteValue as exc:
        raise DivergedIteration(str(exc)) from None
    if not it.converged:
        raise NotConverged(f"recursions did not settle in {policy.max_iter} steps", it)
    x, y = it.fixed_point[:m], it.fixed_point[m:]
    details = {"stage": it.stage.index}
    if isinstance(b, LinearUpdate):
        amp = b.rho / (1.0 - b.rho)
        cf_x, cf_y = amp * u_intact, amp * u_circ
        err = max(float(np.abs(x - cf_x).max()), float(np.abs(y - cf_y).max()))
        details["closed_form_intact"] = cf_x
        details["closed_form_circ"] = cf_y
        details["closed_form_error"] = err
        if err > CLOSED_FORM_TOL:
            raise NotConverged(f"fixed point is {err:.3e} from the closed form (tighten the policy)")
    return _report_from(config, x, y, steps=it.stage.index, details=details)


# -- quantified bounds --------------------------------------------------------------------

def _tail(a, frac=0.5):
    a = np.asarray(a)
    return a[int(len(a) * (1 - frac)):]


def _gap_direction(config: DepletionConfig, v) -> np.ndarray:
    """Per-event gap direction: the declared ``v`` or ``E(1_F ⊙ event)``."""
    if v is not None:
        v = np.asarray(v, dtype=float)
        if v.shape != (config.dim,) or np.any(v < 0):
            raise InvalidConfig("declared gap direction v must be a nonnegative vector of length dim")
        return v
    stim = config.stimulus
    event = stim.s if isinstance(stim, Constant) else stim.event
    return config.embedding @ (config.f_mask * event)


def _event_delta(stim) -> float:
    return 1.0 if isinstance(stim, Constant) else float(stim.delta)


def _check_event_gaps(traj: Trajectory, delta: float, v: np.ndarray):
    need = delta * v
    for t in np.flatnonzero(traj.fired):
        if np.any(traj.gaps[t] - need < -COUPLING_TOL * max(1.0, float(need.max(initial=0.0)))):
            raise BoundHypothesisViolated(
                f"realized gap at event time {int(t)} does not dominate delta * v"
            )


def _bound_report(config, traj, rate, v, v_is_default, tol_periodic=CLOSED_FORM_TOL,
                  tol_gap=1e-6, tol_density=0.02) -> GapReport:
    """Closed-form lower bound with decay ``rate`` matched to the stimulus
    kind, plus the simulated statistic it is compared against."""
    stim = config.stimulus
    delta = _event_delta(stim)
    steps = len(traj.fired)
    dl = traj.delta[1:]
    util = dl @ config.utility_weights
    norms = np.abs(dl).sum(axis=1)
    details = {"tail_start": steps - len(_tail(util))}
    if isinstance(stim, (Constant, Periodic)):
        m = 1 if isinstance(stim, Constant) else stim.period
        kind = "periodic_sup" if m > 1 else "fixed_point"
        bound = rate / (1.0 - rate ** m) * delta * config.utility(v) if rate < 1 else None
        tail = _tail(util)
        observed = float(tail.max())
        details.update(tail_min=float(tail.min()), tail_max=observed, period=m)
        if bound is not None:
            # on the limit cycle the minimum sits m-1 steps after the event
            details["liminf_bound"] = rate ** m / (1.0 - rate ** m) * delta * config.utility(v)
            details["liminf_below_bound"] = bool(float(tail.min()) < bound - tol_periodic)
        tol = tol_periodic
    elif isinstance(stim, BoundedGap):
        g1 = stim.max_gap + 1
        kind = "bounded_gap_liminf"
        vn = float(np.abs(v).sum())
        bound = rate ** g1 / (1.0 - rate ** g1) * delta * vn if rate < 1 else None
        observed = float(_tail(norms).min())
        fired = np.flatnonzero(traj.fired)
        spacing = np.diff(np.concatenate([[-1], fired, [steps]]))
        details.update(max_spacing=int(spacing.max(initial=0)), v_norm=vn,
                       tail_mean=float(_tail(norms).mean()))
        if spacing.max(initial=0) > g1:
            raise BoundHypothesisViolated(f"event spacing {int(spacing.max())} exceeds max_gap + 1")
        tol = tol_gap
    elif isinstance(stim, Bernoulli):
        kind = "density_tail_mean"
        vn = float(np.abs(v).sum())
        # density of the inputs that feed the averaged window, so the mean
        # and the density estimate share their sampling noise
        density = float(_tail(traj.fired).mean())
        bound = rate / (1.0 - rate) * density * delta * vn if rate < 1 else None
        observed = float(_tail(norms).mean())
        details.update(density=density, run_density=float(traj.fired.mean()), v_norm=vn,
                       tail_min=float(_tail(norms).min()), asymptotic=True)
        if bound is not None:
            details["near_bound"] = bool(abs(observed - bound) <= 0.05 * bound)
            details["liminf_below_bound"] = bool(details["tail_min"] < bound - tol_density)
        tol = tol_density
    else:  # pragma: no cover
        raise InvalidConfig(f"unsupported stimulus {type(stim).__name__}")
    details["gap_direction"] = v
    details["gap_direction_declared"] = not v_is_default
    satisfied = None if bound is None else bool(observed >= bound - tol)
    return _report_from(
        config, traj.intact[-1], traj.circ[-1], bound_value=bound, bound_satisfied=satisfied,
        bound_kind=kind, observed=observed, steps=steps, details=details,
    )


def quantified_gap_bound(config: DepletionConfig, steps: int = 10_000, v=None) -> GapReport:
    """Periodic events every ``m`` steps: bound ``(ρ/(1-ρ^m)) δ ⟨w, v⟩``.

    The simulated statistic is the largest utility gap over the tail half,
    i.e. the value right after an event on the limit cycle. The cycle
    minimum is reported separately in ``details``.
    """
    if not isinstance(config.update, LinearUpdate):
        raise PreconditionError("the periodic bound needs a linear update; use nonlinear_kappa_bound")
    if not isinstance(config.stimulus, (Periodic, Constant)):
        raise PreconditionError("the periodic bound needs a periodic (or constant) stimulus")
    direction = _gap_direction(config, v)
    traj = simulate(config, steps)
    _check_event_gaps(traj, _event_delta(config.stimulus), direction)
    return _bound_report(config, traj, config.update.rho, direction, v is None)


def density_gap_bound(
    config: DepletionConfig, steps: int = 20_000, v=None, tail_tolerance: float = 0.02,
    gap_tolerance: float = 1e-6,
) -> GapReport:
    """Non-periodic events, bounds in the l1 norm of ``Δ_n``.

    ``BoundedGap``: ``(ρ^{G+1}/(1-ρ^{G+1})) δ‖v‖`` against the minimum of
    ``‖Δ_n‖`` over the tail half. ``Bernoulli``: ``(ρ/(1-ρ)) D̂ δ‖v‖`` with
    ``D̂`` the realized event density, against the tail-half mean of
    ``‖Δ_n‖`` (asymptotic; the tail minimum is reported separately).
    """
    if not isinstance(config.update, LinearUpdate):
        raise PreconditionError("the density bounds need a linear update; use nonlinear_kappa_bound")
    stim = config.stimulus
    if not isinstance(stim, (Bernoulli, BoundedGap)):
        raise PreconditionError("the density bounds need a Bernoulli or BoundedGap stimulus")
    if steps < 1000 or (isinstance(stim, BoundedGap) and steps < 10 * (stim.max_gap + 1)):
        raise InsufficientTail(f"{steps} steps is too short for a tail estimate")
    direction = _gap_direction(config, v)
    traj = simulate(config, steps)
    _check_event_gaps(traj, stim.delta, direction)
    return _bound_report(config, traj, config.update.rho, direction, v is None,
                         tol_gap=gap_tolerance, tol_density=tail_tolerance)


def check_kappa(update, dim: int, scale: float, probes: int = 100, seed: int = 0):
    """Spot-check ``B(x + w) - B(x) ⪰ κw`` on random nonnegative ``x, w``.

    Returns the first failing ``(x, w)`` or ``None``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        x = rng.uniform(0.0, scale, dim)
        w = rng.uniform(0.0, scale / 4, dim)
        inc = update(x + w) - update(x)
        if np.any(inc - update.kappa * w < -COUPLING_TOL * max(1.0, scale)):
            return x, w
    return None


def nonlinear_kappa_bound(
    config: DepletionConfig, steps: int = 10_000, v=None, probes: int = 100, seed: int = 0,
) -> GapReport:
    """Comparison bound for a nonlinear update: the linear bound for the
    stimulus kind with ``ρ`` replaced by the declared ``κ``.

    The κ declaration is probed first. The comparison recursion
    ``Δ̃_{n+1} = κ(Δ̃_n + d_n)`` is also run on the realized gaps and must
    stay below the simulated gap at every step.
    """
    b = config.update
    if not isinstance(b, NonlinearUpdate):
        b = NonlinearUpdate(b, b.kappa, "linear", {"rho": b.kappa})
        config = config.replace(update=b)
    stim = config.stimulus
    smax = max(float(vec.max(initial=0.0)) for vec in stim.vectors)
    if not isinstance(stim, Constant):
        smax *= 1.0 + stim.delta
    drive = smax * max(1.0, float(np.abs(config.embedding).sum(axis=1).max()))
    scale = 2.0 * (1.0 + drive) / (1.0 - b.kappa) if b.kappa < 1 else 10.0 * (1.0 + drive)
    witness = check_kappa(b, config.dim, scale, probes, seed)
    if witness is not None:
        x, w = witness
        raise KappaDeclarationViolated(
            f"B(x + w) - B(x) is not >= {b.kappa} w at x = {np.round(x, 6).tolist()}"
        )
    direction = _gap_direction(config, v)
    traj = simulate(config, steps)
    _check_event_gaps(traj, _event_delta(stim), direction)

    comp = np.zeros(config.dim)
    worst = math.inf
    for t in range(steps):
        comp = b.kappa * (comp + traj.gaps[t])
        worst = min(worst, float((traj.delta[t + 1] - comp).min()))
    if worst < -COUPLING_TOL * max(1.0, float(np.abs(comp).max(initial=0.0))):
        raise KappaDeclarationViolated("simulated gap fell below the comparison recursion")
    report = _bound_report(config, traj, b.kappa, direction, v is None)
    report.details.update(kappa=b.kappa, comparison_final=comp, comparison_margin=worst)
    return report


@dataclass(frozen=True, eq=False)
class StochasticDemo:
    intact: np.ndarray
    circ: np.ndarray
    dominance: bool
    density: float
    steps: int


def stochastic_demo(config: DepletionConfig, steps: int = 20_000, seed: int | None = None) -> StochasticDemo:
    """Random stimulation on ``F`` with a shared stream; both recursions in
    lockstep with dominance checked at every step."""
    stim = config.stimulus
    if not isinstance(stim, Bernoulli):
        raise PreconditionError("the stochastic demo needs a Bernoulli stimulus")
    if seed is not None:
        stim = Bernoulli(stim.base, stim.event, stim.delta, stim.p, seed)
        config = config.replace(stimulus=stim)
    traj = simulate(config, steps)  # raises CouplingViolated on any step
    return StochasticDemo(traj.intact[-1].copy(), traj.circ[-1].copy(), True,
                          float(traj.fired.mean()), steps)


def random_stimulation_config(p: float = 0.3, seed: int = 0) -> DepletionConfig:
    """ρ = 0.8, identity embedding, second coordinate removed, base (1, 0),
    event adds (0, 0.5) with probability ``p``."""
    return DepletionConfig(
        dim=2,
        embedding=np.eye(2),
        removed_set=frozenset({1}),
        update=LinearUpdate(0.8),
        utility_weights=np.ones(2),
        stimulus=Bernoulli(np.array([1.0, 0.0]), np.array([0.0, 0.5]), 1.0, p=p, seed=seed),
    )


# -- config files -------------------------------------------------------------------------

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

_KEYS = {
    "dim": int, "embedding": list, "removed_set": list, "update": str, "rho": float,
    "kappa": float, "tanh_gain": float, "cap": float, "utility_weights": list,
    "stimulus": str, "stimulus_base": list, "stimulus_event": list, "stimulus_vector": list,
    "delta": float, "period": int, "probability": float, "max_gap": int,
    "adversarial": bool, "seed": int, "steps": int,
}


def _get(doc, key, default=None, required=False):
    if key not in doc:
        if required:
            raise ParseError(f"missing required key {key!r}")
        return default
    val = doc[key]
    want = _KEYS[key]
    if want is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if want is int and isinstance(val, bool) or not isinstance(val, want):
        raise ParseError(f"key {key!r} must be of type {want.__name__}, got {type(val).__name__}")
    return val


def parse_config(text: str, path: str | None = None) -> tuple[DepletionConfig, dict]:
    """Parse a flat TOML depletion config.

    Keys: ``dim``; ``embedding`` (E, default identity); ``removed_set`` (F);
    ``update`` (``linear`` | ``tanh`` | ``saturating``) with ``rho``,
    ``kappa``, ``tanh_gain``, ``cap``; ``utility_weights`` (w, default all
    ones); ``stimulus`` (``constant`` | ``periodic`` | ``bernoulli`` |
    ``bounded_gap``) with ``stimulus_vector`` (constant) or
    ``stimulus_base``/``stimulus_event``/``delta`` and ``period``,
    ``probability``, ``max_gap``, ``adversarial``, ``seed``; ``steps``.

    Returns the config and the run options (``steps``, ``seed``).
    """
    if not text.strip():
        raise ParseError("empty config file", None, path)
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ParseError(str(exc), getattr(exc, "lineno", None), path) from None
    unknown = sorted(set(doc) - set(_KEYS))
    if unknown:
        raise ParseError(f"unknown keys {unknown}", None, path)
    try:
        dim = _get(doc, "dim", required=True)
        emb = np.array(_get(doc, "embedding", np.eye(dim).tolist()), dtype=float)
        removed = frozenset(_get(doc, "removed_set", []))
        weights = np.array(_get(doc, "utility_weights", [1.0] * dim), dtype=float)
        kind = _get(doc, "update", "linear")
        rho = _get(doc, "rho")
        kappa = _get(doc, "kappa")
        if kind == "linear":
            update = LinearUpdate(_get(doc, "rho", required=True))
        elif kind == "tanh":
            update = tanh_update(rho if rho is not None else 0.8,
                                 _get(doc, "tanh_gain", 0.1), kappa)
        elif kind == "saturating":
            update = saturating_update(_get(doc, "cap", required=True),
                                       kappa if kappa is not None else 1.0,
                                       rho if rho is not None else 1.0)
        else:
            raise ParseError(f"unknown update {kind!r}", None, path)
        seed = _get(doc, "seed", 0)
        skind = _get(doc, "stimulus", "constant")
        if skind == "constant":
            stimulus = Constant(np.array(_get(doc, "stimulus_vector", required=True), dtype=float))
        else:
            base = np.array(_get(doc, "stimulus_base", required=True), dtype=float)
            event = np.array(_get(doc, "stimulus_event", required=True), dtype=float)
            delta = _get(doc, "delta", 1.0)
            if skind == "periodic":
                stimulus = Periodic(base, event, delta, _get(doc, "period", 1))
            elif skind == "bernoulli":
                stimulus = Bernoulli(base, event, delta, _get(doc, "probability", required=True), seed)
            elif skind == "bounded_gap":
                stimulus = BoundedGap(base, event, delta, _get(doc, "max_gap", required=True), seed,
                                      _get(doc, "adversarial", False))
            else:
                raise ParseError(f"unknown stimulus {skind!r}", None, path)
        config = DepletionConfig(dim, emb, removed, update, weights, stimulus)
    except ParseError as exc:
        if exc.path is None and path is not None:
            raise ParseError(str(exc), None, path) from None
        raise
    except ValueError as exc:
        raise ParseError(f"malformed value ({exc})", None, path) from None
    return config, {"steps": _get(doc, "steps"), "seed": seed}
