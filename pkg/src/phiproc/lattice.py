"""Powerset lattices over ``{0, ..., n-1}`` with bitset elements.

A subset is a Python ``int`` whose bit ``i`` marks state ``i``; there is no
width limit. :class:`PowersetElement` wraps the bits for the public API,
the internal rules work on raw ints for speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, MonotonicityViolation, ParseError
from .fixpoint import IterationReport, StabilizationPolicy, iterate_to_fixpoint

EXHAUSTIVE_LIMIT = 12


def bits_of(states: Iterable[int]) -> int:
    b = 0
    for s in states:
        b |= 1 << int(s)
    return b


def states_of(bits: int) -> tuple[int, ...]:
    out = []
    i = 0
    while bits:
        if bits & 1:
            out.append(i)
        bits >>= 1
        i += 1
    return tuple(out)


def hamming(a: "PowersetElement", b: "PowersetElement") -> int:
    return (a.bits ^ b.bits).bit_count()


@dataclass(frozen=True)
class PowersetElement:
    bits: int
    n_states: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n_states:
            raise IndexOutOfRange(f"bits {self.bits:#x} exceed {self.n_states} states")

    @classmethod
    def of(cls, n_states: int, states: Iterable[int] = ()) -> "PowersetElement":
        states = list(states)
        for s in states:
            if not 0 <= s < n_states:
                raise IndexOutOfRange(f"state {s} outside 0..{n_states - 1}")
        return cls(bits_of(states), n_states)

    @classmethod
    def empty(cls, n_states: int) -> "PowersetElement":
        return cls(0, n_states)

    @classmethod
    def full(cls, n_states: int) -> "PowersetElement":
        return cls((1 << n_states) - 1, n_states)

    @property
    def states(self) -> tuple[int, ...]:
        return states_of(self.bits)

    def __contains__(self, state: int) -> bool:
        return bool(self.bits >> state & 1)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def _check(self, other: "PowersetElement") -> None:
        if other.n_states != self.n_states:
            raise DimensionMismatch(f"subsets of {self.n_states} and {other.n_states} states")

    def __or__(self, other: "PowersetElement") -> "PowersetElement":
        self._check(other)
        return PowersetElement(self.bits | other.bits, self.n_states)

    def __and__(self, other: "PowersetElement") -> "PowersetElement":
        self._check(other)
        return PowersetElement(self.bits & other.bits, self.n_states)

    def __le__(self, other: "PowersetElement") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def __ge__(self, other: "PowersetElement") -> bool:
        return other <= self

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.states)) + "}"


@dataclass(frozen=True)
class SetValuedMap:
    """``successors[x]`` is the bitset of possible next states of ``x``."""

    n_states: int
    successors: tuple[int, ...]

    def __post_init__(self):
        succ = tuple(int(b) for b in self.successors)
        object.__setattr__(self, "successors", succ)
        if self.n_states < 1:
            raise DimensionMismatch("a set-valued map needs at least one state")
        if len(succ) != self.n_states:
            raise DimensionMismatch(f"{len(succ)} successor sets for {self.n_states} states")
        for x, b in enumerate(succ):
            if b < 0 or b >> self.n_states:
                raise IndexOutOfRange(f"successors of {x} leave the state space")

    @classmethod
    def from_lists(cls, successors: Sequence[Iterable[int]]) -> "SetValuedMap":
        n = len(successors)
        for x, succ in enumerate(successors):
            for y in succ:
                if not 0 <= y < n:
                    raise IndexOutOfRange(f"successor {y} of state {x} outside 0..{n - 1}")
        return cls(n, tuple(bits_of(s) for s in successors))

    @classmethod
    def identity(cls, n_states: int) -> "SetValuedMap":
        return cls(n_states, tuple(1 << i for i in range(n_states)))

    def __call__(self, x: int) -> PowersetElement:
        return PowersetElement(self.successors[x], self.n_states)

    def as_lists(self) -> list[list[int]]:
        return [list(states_of(b)) for b in self.successors]


class MonotoneLatticeMap:
    """A map on the powerset of ``n_states`` states, given by a rule on bitsets.

    ``monotone=True`` declares monotonicity (lifts are monotone by
    construction); otherwise :meth:`ensure_monotone` checks it before use.
    """

    def __init__(self, n_states: int, rule: Callable[[int], int], monotone: bool = False):
        self.n_states = n_states
        self.rule = rule
        self._declared = monotone

    @classmethod
    def from_table(cls, n_states: int, table: Sequence[int], monotone: bool = False):
        if len(table) != 1 << n_states:
            raise DimensionMismatch(f"table needs {1 << n_states} entries, got {len(table)}")
        table = tuple(table)
        return cls(n_states, table.__getitem__, monotone)

    def apply_bits(self, bits: int) -> int:
        out = self.rule(bits)
        if out < 0 or out >> self.n_states:
            raise IndexOutOfRange(f"map produced bits outside {self.n_states} states")
        return out

    def __call__(self, s: PowersetElement) -> PowersetElement:
        if s.n_states != self.n_states:
            raise DimensionMismatch(f"element over {s.n_states} states, map over {self.n_states}")
        return PowersetElement(self.apply_bits(s.bits), self.n_states)

    def check_monotone(self, samples: int = 20_000, seed: int = 0) -> tuple[int, int] | None:
        """Return a witness pair ``(S, T)`` with ``S ⊆ T`` but
        ``f(S) ⊄ f(T)``, or ``None``.

        Up to :data:`EXHAUSTIVE_LIMIT` states every covering pair
        ``S ⊂ S ∪ {x}`` is checked, which suffices by transitivity of ``⊆``;
        above that, random covering pairs are sampled.
        """
        n = self.n_states
        if n <= EXHAUSTIVE_LIMIT:
            images = [self.apply_bits(s) for s in range(1 << n)]
            for s in range(1 << n):
                fs = images[s]
                for x in range(n):
                    t = s | (1 << x)
                    if t != s and fs & ~images[t]:
                        return s, t
            return None
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            s = int.from_bytes(rng.bytes((n + 7) // 8), "little") & ((1 << n) - 1)
            t = s | (1 << int(rng.integers(n)))
            if t != s and self.apply_bits(s) & ~self.apply_bits(t):
                return s, t
        return None

    def ensure_monotone(self) -> None:
        if self._declared:
            return
        witness = self.check_monotone()
        if witness is not None:
            s, t = witness
            raise MonotonicityViolation(
                f"map is not monotone: {set(states_of(s))} ⊆ {set(states_of(t))} "
                f"but images are not nested"
            )
        self._declared = True

    def then(self, other: "MonotoneLatticeMap") -> "MonotoneLatticeMap":
        """``other ∘ self``: apply ``self`` first."""
        if other.n_states != self.n_states:
            raise DimensionMismatch("maps over different state counts")
        first, second = self.apply_bits, other.apply_bits
        return MonotoneLatticeMap(
            self.n_states, lambda b: second(first(b)), self._declared and other._declared
        )


def _union_rule(successors: tuple[int, ...]) -> Callable[[int], int]:
    def rule(bits: int) -> int:
        out = 0
        i = 0
        while bits:
            if bits & 1:
                out |= successors[i]
            bits >>= 1
            i += 1
        return out

    return rule


def lift(m: SetValuedMap) -> MonotoneLatticeMap:
    """Deterministic powerset lift ``S ↦ ⋃_{x∈S} m(x)``."""
    return MonotoneLatticeMap(m.n_states, _union_rule(m.successors), monotone=True)


def compose(f: SetValuedMap, g: SetValuedMap) -> SetValuedMap:
    """Set-valued composition, ``f`` first: ``x ↦ ⋃_{y∈f(x)} g(y)``."""
    if f.n_states != g.n_states:
        raise DimensionMismatch(f"maps over {f.n_states} and {g.n_states} states")
    rule = _union_rule(g.successors)
    return SetValuedMap(f.n_states, tuple(rule(b) for b in f.successors))


def compose_lifts(f: SetValuedMap, g: SetValuedMap) -> MonotoneLatticeMap:
    return lift(compose(f, g))


def _powerset_iteration(step_bits, start_bits: int, n_states: int) -> IterationReport:
    report = iterate_to_fixpoint(
        step_bits,
        start_bits,
        metric=lambda a, b: (a ^ b).bit_count(),
        # a strictly increasing chain in a finite powerset has at most n_states + 1 links
        policy=StabilizationPolicy.exact(max_iter=n_states + 2),
    )
    if not report.converged:  # pragma: no cover - impossible for monotone chains
        raise MonotonicityViolation("powerset chain failed to stabilize within its length bound")
    return IterationReport(
        PowersetElement(report.fixed_point, n_states), report.stage, report.residuals, True
    )


def least_fixed_point_from(m: MonotoneLatticeMap, seed: PowersetElement) -> IterationReport:
    """Least fixed point of ``S ↦ S ∪ m(S)`` above ``seed``.

    For a lift this is the reachability closure ``⋃_n m^n(seed)``. The chain
    is increasing by construction; monotonicity of ``m`` is checked both up
    front and along the chain.
    """
    if seed.n_states != m.n_states:
        raise DimensionMismatch(f"seed over {seed.n_states} states, map over {m.n_states}")
    m.ensure_monotone()
    last_image = [None]

    def step(bits: int) -> int:
        img = m.apply_bits(bits)
        prev = last_image[0]
        if prev is not None and prev & ~img:
            raise MonotonicityViolation("image shrank along an increasing chain")
        last_image[0] = img
        return bits | img

    return _powerset_iteration(step, seed.bits, m.n_states)


def pack(maps: Sequence[MonotoneLatticeMap]) -> IterationReport:
    """Least fixed point of the packed map ``maps[-1] ∘ ... ∘ maps[0]``
    (``maps[0]`` applied first), iterated from the empty set."""
    if not maps:
        raise DimensionMismatch("pack needs at least one map")
    n = maps[0].n_states
    for mp in maps:
        if mp.n_states != n:
            raise DimensionMismatch("packed maps act on different state counts")
        mp.ensure_monotone()
    packed = reduce(MonotoneLatticeMap.then, maps)

    def step(bits: int) -> int:
        out = packed.apply_bits(bits)
        if bits & ~out:
            raise MonotonicityViolation("packed chain from the bottom element decreased")
        return out

    return _powerset_iteration(step, 0, n)


def reachable(m: SetValuedMap, start: Iterable[int]) -> PowersetElement:
    """Graph-search closure of ``start`` under ``m`` (breadth-first)."""
    seen = set(start)
    frontier = list(seen)
    while frontier:
        nxt = []
        for x in frontier:
            for y in states_of(m.successors[x]):
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return PowersetElement.of(m.n_states, seen)


def lifted_orbit(m: SetValuedMap, start: PowersetElement, steps: int) -> list[PowersetElement]:
    """``[S, m̂(S), m̂²(S), ...]`` with ``steps + 1`` entries (no accumulation)."""
    f = lift(m)
    out = [start]
    for _ in range(steps):
        out.append(f(out[-1]))
    return out


# -- text format --------------------------------------------------------------

def parse_set_valued_map(text: str, path: str | None = None) -> SetValuedMap:
    """Parse ``state: succ1 succ2 ...`` lines; ``#`` starts a comment.

    States must be exactly ``0..n-1``, each listed once, in any order.
    """
    entries: dict[int, list[int]] = {}
    lines: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, tail = line.partition(":")
        if not sep:
            raise ParseError("expected 'state: successors...'", lineno, path)
        try:
            state = int(head.strip())
            succ = [int(tok) for tok in tail.split()]
        except ValueError as exc:
            raise ParseError(f"non-integer token ({exc})", lineno, path) from None
        if state in entries:
            raise ParseError(f"state {state} listed twice", lineno, path)
        entries[state] = succ
        lines[state] = lineno
    if not entries:
        raise ParseError("no states defined", None, path)
    n = len(entries)
    if sorted(entries) != list(range(n)):
        raise ParseError(f"states must be 0..{n - 1}, got {sorted(entries)}", None, path)
    for state, succ in entries.items():
        bad = [y for y in succ if not 0 <= y < n]
        if bad:
            raise ParseError(f"successor {bad[0]} outside 0..{n - 1}", lines[state], path)
    return SetValuedMap.from_lists([entries[i] for i in range(n)])


def format_set_valued_map(m: SetValuedMap) -> str:
    return "".join(
        f"{x}:{''.join(' ' + str(y) for y in succ)}\n" for x, succ in enumerate(m.as_lists())
    )
