import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phiproc.errors import (
    InvalidPolicy,
    InvalidSchedule,
    NonFiniteValue,
    UniquenessCheckFailed,
    ZeroDistanceProbe,
)
from phiproc.fixpoint import (
    EventSchedule,
    Mode,
    Stage,
    StabilizationPolicy,
    contraction_fixed_point,
    iterate_to_fixpoint,
    verify_event_contraction,
)


def test_identity_is_fixed_at_stage_zero():
    rep = iterate_to_fixpoint(lambda z: z, 3.0)
    assert rep.converged and rep.stage == Stage(0) and rep.fixed_point == 3.0
    assert rep.residuals == (0.0,)


def test_affine_map_reaches_closed_form():
    rep = iterate_to_fixpoint(lambda z: 0.8 * z + np.array([1.0, 0.5]), np.zeros(2))
    assert rep.converged
    # step residual 1e-10 bounds the distance to the limit by 1e-10 / (1 - 0.8)
    assert np.abs(rep.fixed_point - [5.0, 2.5]).max() <= 5e-10


def test_scaled_example_steady_state():
    # x -> 0.8 (x + s) with s = (1, 0.5) has steady state (4, 2)
    s = np.array([1.0, 0.5])
    rep = iterate_to_fixpoint(lambda z: 0.8 * (z + s), np.zeros(2),
                              policy=StabilizationPolicy.numeric(1e-12, 0.0))
    assert np.abs(rep.fixed_point - [4.0, 2.0]).max() <= 1e-9


def test_budget_exhaustion_is_reported():
    rep = iterate_to_fixpoint(lambda z: z + 1.0, 0.0, policy=StabilizationPolicy.numeric(max_iter=50))
    assert not rep.converged
    assert rep.stage == Stage(50)
    assert len(rep.residuals) == 50


def test_residual_bookkeeping():
    rep = iterate_to_fixpoint(lambda z: 0.5 * z, 1.0, policy=StabilizationPolicy.numeric(1e-6, 0.0))
    n = rep.stage.index
    assert len(rep.residuals) == n + 1
    assert rep.residuals[-1] <= 1e-6
    assert all(r > 1e-6 for r in rep.residuals[:-1])


def test_exact_mode_ignores_tolerance():
    # 1/2^k in floats reaches exactly 0 only after underflow
    rep = iterate_to_fixpoint(lambda z: z // 2, 1 << 20, lambda a, b: abs(a - b),
                              StabilizationPolicy.exact())
    assert rep.fixed_point == 0 and rep.stage == Stage(21)


def test_nonfinite_iterate():
    with pytest.raises(NonFiniteValue):
        iterate_to_fixpoint(lambda z: z * 1e300, 1e10)


def test_policy_validation():
    with pytest.raises(InvalidPolicy):
        StabilizationPolicy(Mode.NUMERIC, 0.0, 0.0, 10)
    with pytest.raises(InvalidPolicy):
        StabilizationPolicy.numeric(max_iter=0)
    StabilizationPolicy(Mode.EXACT, 0.0, 0.0, 10)


def test_omega_stage_label():
    assert Stage.OMEGA.is_omega and str(Stage.OMEGA) == "omega" and str(Stage(4)) == "4"


@settings(max_examples=50, deadline=None)
@given(rho=st.floats(0.05, 0.95), c=st.floats(-10, 10), x0=st.floats(-100, 100))
def test_geometric_residual_decay(rho, c, x0):
    rep = iterate_to_fixpoint(lambda z: rho * z + c, x0)
    r = rep.residuals
    assert all(r[k + 1] <= rho * r[k] + 1e-12 for k in range(len(r) - 1))
    assert abs(rep.fixed_point - c / (1 - rho)) <= 1e-6


def test_deterministic_reports():
    f = lambda z: np.cos(z)
    a, b = iterate_to_fixpoint(f, 1.0), iterate_to_fixpoint(f, 1.0)
    assert a == b


def test_exact_fixed_point_is_fixed():
    step = lambda s: s | {min(s) // 2} if min(s) > 0 else s
    rep = iterate_to_fixpoint(step, frozenset({40}), lambda a, b: len(a ^ b), StabilizationPolicy.exact())
    assert step(rep.fixed_point) == rep.fixed_point


# -- event schedules ---------------------------------------------------------------------------

def test_schedule_validation():
    with pytest.raises(InvalidSchedule):
        EventSchedule((1, 1), (0.5, 0.5))
    with pytest.raises(InvalidSchedule):
        EventSchedule((0, 1), (0.5, 0.5))
    with pytest.raises(InvalidSchedule):
        EventSchedule((1, 2), (0.5, 1.0))
    with pytest.raises(InvalidSchedule):
        EventSchedule((1, 2), (0.5,))


def test_running_products_nonincreasing():
    s = EventSchedule((1, 3, 7), (0.9, 0.5, 0.99))
    p = s.running_products
    assert p == pytest.approx((0.9, 0.45, 0.4455))
    assert all(b <= a for a, b in zip(p, p[1:]))


def test_halving_complies_with_declared_factors():
    sched = EventSchedule(tuple(range(1, 6)), (0.6,) * 5)
    ev = verify_event_contraction(lambda z: 0.5 * z, sched, [(0.0, 1.0)])
    assert ev.compliant
    assert [o.ratio for o in ev.observations] == pytest.approx([0.5 ** k for k in range(1, 6)])


def test_identity_violates_at_first_event():
    ev = verify_event_contraction(lambda z: z, EventSchedule((1,), (0.9,)), [(0.0, 1.0)])
    assert not ev.compliant and ev.violations[0].k == 1 and ev.violations[0].ratio == 1.0


def test_zero_distance_probe():
    with pytest.raises(ZeroDistanceProbe):
        verify_event_contraction(lambda z: z, EventSchedule((1,), (0.5,)), [(1.0, 1.0)])


# -- contraction -----------------------------------------------------------------------------

def test_two_starts_agree():
    pol = StabilizationPolicy.numeric(1e-12, 0.0)
    rep = contraction_fixed_point(lambda z: 0.5 * z + 1, None, 0.0, policy=pol, second_start=100.0)
    assert abs(rep.fixed_point - 2.0) <= 1e-10
    assert abs(rep.info["second_fixed_point"] - 2.0) <= 1e-10


def test_identity_is_not_unique():
    with pytest.raises(UniquenessCheckFailed):
        contraction_fixed_point(lambda z: z, None, np.zeros(3))
    with pytest.raises(UniquenessCheckFailed):
        contraction_fixed_point(lambda z: z, None, 5, policy=StabilizationPolicy.exact())


def test_componentwise_geometric_limit():
    rho = np.array([0.2, 0.5, 0.9])
    c = np.array([1.0, -2.0, 0.3])
    sched = EventSchedule((1, 2, 3), (0.95, 0.95, 0.95))
    rep = contraction_fixed_point(lambda z: rho * z + c, sched, np.zeros(3),
                                  policy=StabilizationPolicy.numeric(1e-12, 0.0))
    assert np.abs(rep.fixed_point - c / (1 - rho)).max() <= 1e-10
    assert rep.info["evidence"].compliant
    assert math.isclose(rep.info["evidence"].prefix_product, 0.95 ** 3)
