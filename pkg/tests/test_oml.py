import math

import numpy as np
import pytest

from phiproc import oml
from phiproc.errors import DimensionMismatch, InvalidSubspace
from phiproc.fixpoint import Stage

Sub = oml.SubspaceProjection


def rot(th):
    return np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])


def unitary(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_sub(rng, n, k=None):
    k = int(rng.integers(0, n + 1)) if k is None else k
    return Sub.span(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)), n)


def test_subspace_basics():
    a = Sub.span(np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]))
    assert a.rank == 1 and a.same_as(Sub.coordinate(3, [0]))
    assert Sub.zero(3).rank == 0 and Sub.full(3).rank == 3
    assert Sub.full(3).contains(a) and not a.contains(Sub.full(3))
    with pytest.raises(InvalidSubspace):
        Sub(np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_join_and_meet():
    e = lambda *ax: Sub.coordinate(3, ax)
    assert oml.join(e(0), e(1)).same_as(e(0, 1))
    assert oml.meet(e(0, 1), e(1, 2)).same_as(e(1))
    assert oml.meet(e(0), e(1)).rank == 0
    tilted = Sub.span(np.array([1.0, 1.0, 0.0]))
    assert oml.meet(e(0, 1), tilted).same_as(tilted)
    with pytest.raises(DimensionMismatch):
        oml.join(e(0), Sub.coordinate(2, [0]))


def test_lattice_laws_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        a, b = random_sub(rng, n), random_sub(rng, n)
        j, m = oml.join(a, b), oml.meet(a, b)
        assert j.contains(a) and j.contains(b)
        assert a.contains(m) and b.contains(m)
        # dim(A + B) + dim(A ∩ B) = dim A + dim B
        assert j.rank + m.rank == a.rank + b.rank


def test_step_examples():
    p0 = Sub.coordinate(2, [0])
    assert oml.phi_oml_step(oml.OmlSystem(rot(0.4), Sub.zero(2), p0), p0).same_as(p0)
    assert oml.phi_oml_step(oml.OmlSystem(np.eye(2), Sub.full(2), p0), p0).same_as(p0)
    quarter = oml.OmlSystem(rot(math.pi / 2), Sub.full(2), p0)
    assert oml.phi_oml_step(quarter, p0).same_as(Sub.full(2))


def test_fixed_point_examples():
    rep = oml.oml_fixed_point(oml.OmlSystem(rot(math.pi / 2), Sub.full(2), Sub.coordinate(2, [0])))
    assert rep.fixed_point.same_as(Sub.full(2)) and rep.stage == Stage(1)
    rng = np.random.default_rng(1)
    p0 = random_sub(rng, 4, 2)
    rep = oml.oml_fixed_point(oml.OmlSystem(np.eye(4), random_sub(rng, 4), p0))
    assert rep.fixed_point.same_as(p0) and rep.stage == Stage(0)
    shift = np.roll(np.eye(3), 1, axis=0)
    rep = oml.oml_fixed_point(oml.OmlSystem(shift, Sub.coordinate(3, [0, 1]), Sub.coordinate(3, [0])))
    assert rep.fixed_point.same_as(Sub.coordinate(3, [0, 1]))
    cert = rep.info["certificate"]
    assert max(cert.above_seed, cert.above_image) <= 1e-8


def test_system_validation():
    with pytest.raises(InvalidSubspace):
        oml.OmlSystem(np.array([[1.0, 1.0], [0.0, 1.0]]), Sub.full(2), Sub.zero(2))
    with pytest.raises(DimensionMismatch):
        oml.OmlSystem(np.eye(3), Sub.full(2), Sub.zero(3))


def test_step_monotone_on_nested_pairs():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        v, q = unitary(rng, n), random_sub(rng, n)
        sys_ = oml.OmlSystem(v, q, Sub.zero(n))
        big = random_sub(rng, n)
        k = int(rng.integers(0, big.rank + 1))
        small = Sub.span(big.basis @ (rng.standard_normal((big.rank, k)) + 0j), n)
        assert big.contains(small)
        assert oml.phi_oml_step(sys_, big).contains(oml.phi_oml_step(sys_, small))


def test_ascent_and_stage_bound():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        v = unitary(rng, n)
        if rng.random() < 0.5 and n >= 3:
            v = np.eye(n)[:, np.roll(np.arange(n), 1)] + 0j  # permutation: longer chains
        sys_ = oml.OmlSystem(v, random_sub(rng, n, int(rng.integers(n // 2, n + 1))), random_sub(rng, n, 1))
        rep = oml.oml_fixed_point(sys_)
        p = sys_.p0
        for _ in range(rep.stage.index):
            nxt = oml.phi_oml_step(sys_, p)
            assert nxt.contains(p) and nxt.rank >= p.rank
            p = nxt
        assert p.same_as(rep.fixed_point)
        assert rep.stage.index <= n
        d = oml.fixed_point_defects(sys_, rep.fixed_point)
        assert d.above_seed <= 1e-8 and d.above_image <= 1e-8


def test_cyclic_chain_takes_full_length():
    n = 5
    shift = np.roll(np.eye(n), 1, axis=0)
    rep = oml.oml_fixed_point(oml.OmlSystem(shift, Sub.full(n), Sub.coordinate(n, [0])))
    assert rep.fixed_point.rank == n and rep.stage.index == n - 1
