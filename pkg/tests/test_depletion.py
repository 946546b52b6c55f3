import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phiproc import depletion as dep
from phiproc.errors import (
    BoundHypothesisViolated,
    DimensionMismatch,
    IndexOutOfRange,
    InsufficientTail,
    InvalidConfig,
    KappaDeclarationViolated,
    NonPositiveStimulus,
    ParseError,
)

E2 = np.array([0.0, 1.0])
BASE = np.array([1.0, 0.0])


def two_site(update=None, stimulus=None, removed=(1,), emb=None):
    return dep.DepletionConfig(
        2, np.eye(2) if emb is None else emb, frozenset(removed),
        update or dep.LinearUpdate(0.8), np.ones(2),
        stimulus or dep.Constant(np.array([1.0, 0.5])),
    )


def test_project_F():
    assert np.array_equal(dep.project_F([1, 0.5], {1}), [1, 0])
    assert np.array_equal(dep.project_F([1, 0.5], set()), [1, 0.5])
    assert np.array_equal(dep.project_F([0, 0], {0, 1}), [0, 0])
    with pytest.raises(IndexOutOfRange):
        dep.project_F([1, 2], {2})


def test_config_validation():
    with pytest.raises(InvalidConfig):
        dep.LinearUpdate(1.0)
    with pytest.raises(InvalidConfig):
        two_site(emb=np.array([[1.0, -0.1], [0.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        two_site(stimulus=dep.Constant(np.ones(3)))
    with pytest.raises(NonPositiveStimulus):
        dep.Constant(np.array([1.0, -1.0]))
    with pytest.raises(IndexOutOfRange):
        two_site(removed=(2,))
    with pytest.raises(InvalidConfig):
        dep.Periodic(BASE, E2, 1.0, 0)
    with pytest.raises(InvalidConfig):
        dep.Bernoulli(BASE, E2, 1.0, 1.5)


def test_worked_example():
    rep = dep.run_pair(dep.two_site_config())
    assert np.abs(rep.intact_fixed - [4, 2]).max() <= 1e-9
    assert np.abs(rep.circ_fixed - [4, 0]).max() <= 1e-9
    assert np.abs(rep.gap_vector - [0, 2]).max() <= 1e-9
    assert abs(rep.utility_gap - 2) <= 1e-9
    assert rep.details["closed_form_error"] <= 1e-9


def test_empty_removed_set_gives_zero_gap():
    rep = dep.run_pair(two_site(removed=()))
    assert np.array_equal(rep.gap_vector, np.zeros(2))


def test_blind_embedding_zero_gap():
    cfg = dep.blind_embedding_config()
    assert not cfg.f_detectable
    rep = dep.run_pair(cfg, 10_000)
    assert rep.utility_gap == 0.0
    const = dep.blind_embedding_config(dep.Constant(np.array([1.0, 1.0])))
    assert dep.run_pair(const).utility_gap == 0.0


def test_periodic_examples():
    rep = dep.quantified_gap_bound(two_site(stimulus=dep.Periodic(BASE, E2, 1.0, 1)), 2000, v=E2)
    assert rep.bound_value == pytest.approx(4.0, abs=1e-12)
    assert abs(rep.observed - 4.0) <= 1e-9

    rep = dep.quantified_gap_bound(two_site(dep.LinearUpdate(0.5), dep.Periodic(BASE, E2, 1.0, 2)), 2000, v=E2)
    assert rep.bound_value == pytest.approx(2 / 3)
    assert rep.observed >= rep.bound_value - 1e-9 and rep.bound_satisfied
    # on the limit cycle the gap alternates between 2/3 (after an event) and 1/3
    assert rep.details["tail_min"] == pytest.approx(1 / 3, abs=1e-9)
    assert rep.details["liminf_bound"] == pytest.approx(1 / 3)

    rep = dep.quantified_gap_bound(two_site(stimulus=dep.Periodic(BASE, E2, 0.0, 1)), 500)
    assert rep.bound_value == 0.0 and rep.observed >= 0.0


def test_partial_sum_oracle_for_periodic_gap():
    rho, m = 0.7, 3
    rep = dep.quantified_gap_bound(two_site(dep.LinearUpdate(rho), dep.Periodic(BASE, E2, 1.0, m)), 3000, v=E2)
    # post-event value on the cycle: sum_k rho^(1 + k m)
    oracle = sum(rho ** (1 + k * m) for k in range(2000))
    assert rep.observed == pytest.approx(oracle, abs=1e-9)


def test_declared_direction_must_be_dominated():
    cfg = two_site(stimulus=dep.Periodic(BASE, E2, 1.0, 1))
    with pytest.raises(BoundHypothesisViolated):
        dep.quantified_gap_bound(cfg, 100, v=np.array([0.0, 2.0]))


def test_bounded_gap_bound():
    for adversarial in (True, False):
        cfg = two_site(stimulus=dep.BoundedGap(BASE, E2, 1.0, 2, 0, adversarial))
        rep = dep.density_gap_bound(cfg, 20_000)
        assert rep.bound_value == pytest.approx(0.512 / 0.488)
        assert rep.observed >= rep.bound_value - 1e-6
        assert rep.details["max_spacing"] <= 3
    adv = dep.density_gap_bound(two_site(stimulus=dep.BoundedGap(BASE, E2, 1.0, 2, 0, True)), 20_000)
    assert adv.observed == pytest.approx(adv.bound_value, abs=1e-9)


def test_bernoulli_bound():
    rep = dep.density_gap_bound(dep.random_stimulation_config(0.3, 0), 20_000)
    assert 0.27 <= rep.details["run_density"] <= 0.33
    assert rep.observed >= rep.bound_value - 0.02
    assert rep.details["near_bound"]


def test_insufficient_tail():
    with pytest.raises(InsufficientTail):
        dep.density_gap_bound(dep.random_stimulation_config(), 999)
    with pytest.raises(InsufficientTail):
        dep.density_gap_bound(two_site(stimulus=dep.BoundedGap(BASE, E2, 1.0, 200, 0)), 1500)


def test_kappa_consistency_with_linear_bound():
    stim = dep.Periodic(BASE, E2, 1.0, 2)
    lin = dep.quantified_gap_bound(two_site(stimulus=stim), 2000)
    declared = dep.NonlinearUpdate(lambda z: 0.8 * z, 0.8, "linear", {"rho": 0.8})
    non = dep.nonlinear_kappa_bound(two_site(declared, stim), 2000)
    assert non.bound_value == pytest.approx(lin.bound_value, abs=1e-12)
    assert non.observed == pytest.approx(lin.observed, abs=1e-12)


def test_tanh_update_passes_probes():
    cfg = two_site(dep.tanh_update(0.8, 0.1), dep.Periodic(BASE, E2, 1.0, 1))
    rep = dep.nonlinear_kappa_bound(cfg, 2000)
    assert rep.bound_satisfied and rep.observed >= rep.bound_value
    assert rep.details["comparison_margin"] >= -1e-12


def test_saturating_update_violates_kappa():
    cfg = two_site(dep.saturating_update(cap=2.0, kappa=0.8, rho=0.8), dep.Periodic(BASE, E2, 1.0, 1))
    with pytest.raises(KappaDeclarationViolated):
        dep.nonlinear_kappa_bound(cfg, 1000)


def test_stochastic_demo_examples():
    demo = dep.stochastic_demo(dep.random_stimulation_config(0.3, 0), 20_000)
    assert demo.dominance
    assert demo.intact[0] == pytest.approx(4.0, abs=1e-9) and demo.circ[0] == pytest.approx(4.0, abs=1e-9)
    never = dep.stochastic_demo(dep.random_stimulation_config(0.0, 0), 2_000)
    assert np.array_equal(never.intact, never.circ)
    always = dep.stochastic_demo(dep.random_stimulation_config(1.0, 0), 2_000)
    assert np.abs(always.intact - [4, 2]).max() <= 1e-9 and np.abs(always.circ - [4, 0]).max() <= 1e-9


def test_shared_seed_reproducible():
    a = dep.simulate(dep.random_stimulation_config(0.3, 7), 500)
    b = dep.simulate(dep.random_stimulation_config(0.3, 7), 500)
    assert np.array_equal(a.intact, b.intact) and np.array_equal(a.fired, b.fired)


def _random_config(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 6))
    emb = rng.uniform(0, 1, (m, m)) * (rng.random((m, m)) < 0.6)
    removed = frozenset(int(i) for i in np.flatnonzero(rng.random(m) < 0.5))
    return rng, m, emb, removed


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_coupling_and_strictness(seed):
    rng, m, emb, removed = _random_config(seed)
    update = dep.LinearUpdate(float(rng.uniform(0.3, 0.95))) if rng.random() < 0.5 else \
        dep.tanh_update(float(rng.uniform(0.3, 0.8)), 0.1)
    stim = dep.Periodic(rng.uniform(0, 1, m), rng.uniform(0.1, 1, m), 1.0, int(rng.integers(1, 4)))
    cfg = dep.DepletionConfig(m, emb, removed, update, rng.uniform(0.1, 1, m), stim)
    traj = dep.simulate(cfg, 300)  # raises on any coupling violation
    assert np.all(traj.intact >= traj.circ - 1e-12)
    if cfg.f_detectable and cfg.order_reflecting:
        assert cfg.utility(traj.delta[-1]) > 0


def test_random_periodic_bounds():
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        removed = frozenset(int(i) for i in rng.choice(m, int(rng.integers(1, m + 1)), replace=False))
        emb = rng.uniform(0, 1, (m, m))
        event = np.where(np.isin(np.arange(m), sorted(removed)), rng.uniform(0.1, 1, m), 0.0)
        cfg = dep.DepletionConfig(m, emb, removed, dep.LinearUpdate(float(rng.uniform(0.3, 0.95))),
                                  rng.uniform(0.1, 1, m),
                                  dep.Periodic(rng.uniform(0, 1, m), event, 1.0, int(rng.integers(1, 6))))
        rep = dep.quantified_gap_bound(cfg, 1500)
        assert rep.observed >= rep.bound_value - 1e-9


# -- config files ----------------------------------------------------------------------------

EXAMPLE = """
dim = 2
embedding = [[1.0, 0.0], [0.0, 1.0]]
removed_set = [1]
rho = 0.8
utility_weights = [1, 1]
stimulus = "constant"
stimulus_vector = [1.0, 0.5]
"""


def test_parse_example_config():
    cfg, opts = dep.parse_config(EXAMPLE)
    assert opts == {"steps": None, "seed": 0}
    rep = dep.run_pair(cfg)
    assert np.abs(rep.gap_vector - [0, 2]).max() <= 1e-9


def test_parse_event_configs():
    cfg, opts = dep.parse_config("""
dim = 2
removed_set = [1]
rho = 0.5
stimulus = "bernoulli"
stimulus_base = [1.0, 0.0]
stimulus_event = [0.0, 0.5]
probability = 0.3
seed = 9
steps = 3000
""")
    assert isinstance(cfg.stimulus, dep.Bernoulli) and cfg.stimulus.seed == 9 and opts["steps"] == 3000
    cfg, _ = dep.parse_config('dim = 1\nupdate = "saturating"\ncap = 2.0\nkappa = 0.5\nstimulus = "bounded_gap"\n'
                              'stimulus_base = [0.0]\nstimulus_event = [1.0]\nmax_gap = 3\n')
    assert isinstance(cfg.update, dep.NonlinearUpdate) and cfg.stimulus.max_gap == 3


@pytest.mark.parametrize("text", [
    "",
    "dim = 2\nbogus = 1\n",
    "dim = 'two'\n",
    "dim = 2\nrho = 0.8\nstimulus = 'constant'\n",
    "dim = 2\nrho = 0.8\nstimulus = 'laser'\nstimulus_base = [0,0]\nstimulus_event=[0,0]\n",
    "dim = 2\nupdate = 'cubic'\n",
    "dim = = 2\n",
])
def test_parse_config_errors(text):
    with pytest.raises(ParseError):
        dep.parse_config(text, "x.cfg")


def test_toml_syntax_error_has_line():
    with pytest.raises(ParseError) as exc:
        dep.parse_config("dim = 2\nrho = \n", "x.cfg")
    assert exc.value.line == 2
