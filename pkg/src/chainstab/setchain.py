"""State-space regions, chain cell decomposition, and the piecewise feedback.

A chain is an ordered cover Omega_1..Omega_N of the state space with
Omega_1 = Theta. Cells are the set differences
C_i = Omega_i \\ (Omega_1 u ... u Omega_{i-1}), so the smallest index i with
x in Omega_i is exactly the cell containing x; classification never needs
explicit difference sets, and the smallest-index scan doubles as the
floating-point tie-break on cell boundaries.

Countable chains are represented by a generator (index -> (region,
control)); cells materialize lazily as classification requests them. A
generator may also supply a locator giving the covering index in O(1) when
its tail regions are pairwise disjoint.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import Box, ControlOutOfSet


class EmptyChain(ValueError):
    """A chain needs at least one region."""


class NotCovered(LookupError):
    """State lies outside the union of the chain regions."""


class ChainHeadMismatch(ValueError):
    """Omega_1 of the supplied chain is not the feedback's Theta."""


# ---------------------------------------------------------------------------
# Region predicates
# ---------------------------------------------------------------------------


class Region:
    """Predicate-defined subset of R^n; membership is total and pure."""

    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x: Sequence[float]) -> bool:
        raise NotImplementedError

    def complement(self) -> "Region":
        return Complement(self)


@dataclass(frozen=True)
class HalfSpace(Region):
    """normal . x <= offset (or < when strict)."""

    normal: tuple
    offset: float
    strict: bool = False
    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x):
        s = 0.0
        for a, v in zip(self.normal, x):
            s += a * v
        return s < self.offset if self.strict else s <= self.offset


@dataclass(frozen=True)
class BoxRegion(Region):
    box: Box
    label: str = ""

    @property
    def bounding(self):
        return self.box

    def contains(self, x):
        return self.box.contains(x)


@dataclass(frozen=True)
class Band(Region):
    """|x_axis| <= half_width."""

    axis: int
    half_width: float
    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x):
        return abs(x[self.axis]) <= self.half_width


@dataclass(frozen=True)
class Sublevel(Region):
    """{x : fn(x) < level} (or <= when strict is False)."""

    fn: Callable
    level: float
    strict: bool = True
    fn_id: str = ""
    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x):
        v = self.fn(x)
        return v < self.level if self.strict else v <= self.level


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple
    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x):
        return all(p.contains(x) for p in self.parts)


@dataclass(frozen=True)
class UnionRegion(Region):
    parts: tuple
    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x):
        return any(p.contains(x) for p in self.parts)


@dataclass(frozen=True)
class Complement(Region):
    part: Region
    label: str = ""
    bounding: Optional[Box] = None

    def contains(self, x):
        return not self.part.contains(x)


def full_space(dim: int, label: str = "R^n") -> BoxRegion:
    return BoxRegion(Box.reals(dim), label=label)


def interval(lo: float, hi: float, lo_strict: bool = False, hi_strict: bool = False,
             label: str = "") -> Region:
    """1-d interval with per-end strictness, e.g. (lo, hi]."""
    parts = (
        HalfSpace((-1.0,), -lo, strict=lo_strict),  # x > lo  (or >=)
        HalfSpace((1.0,), hi, strict=hi_strict),    # x < hi  (or <=)
    )
    return Intersection(parts, label=label)


def sample_region(region: Region, rng: np.random.Generator, count: int,
                  box: Optional[Box] = None, max_tries: int = 100_000) -> list:
    """Rejection-sample points of the region from its (or a supplied) box."""
    box = box or region.bounding
    if box is None:
        raise ValueError("region has no bounding box; supply one for sampling")
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ValueError("sampling box must be finite")
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"rejection sampling failed after {max_tries} tries")
        x = tuple(rng.uniform(lo, hi))
        if region.contains(x):
            out.append(x)
    return out


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------


class SetChain:
    """Finite ordered chain with derived cells and unions."""

    mode = "finite"

    def __init__(self, regions: Sequence[Region], controls: Optional[Sequence] = None):
        if not regions:
            raise EmptyChain("need at least one region")
        self.regions = tuple(regions)
        if controls is None:
            controls = (None,) * len(self.regions)
        if len(controls) != len(self.regions):
            raise ValueError("one control entry per region (entry 0 is ignored)")
        self.controls = tuple(tuple(c) if c is not None else None for c in controls)

    @property
    def length(self) -> int:
        return len(self.regions)

    def classify(self, x) -> int:
        """Smallest i (1-based) with x in Omega_i; that index is the cell."""
        for i, omega in enumerate(self.regions, start=1):
            if omega.contains(x):
                return i
        raise NotCovered(f"x = {tuple(x)} outside the chain union")

    def cell_contains(self, x, i: int) -> bool:
        """Membership in C_i = Omega_i minus the earlier unions."""
        if not 1 <= i <= self.length:
            raise IndexError(f"cell index {i} out of range")
        if not self.regions[i - 1].contains(x):
            return False
        return all(not self.regions[k].contains(x) for k in range(i - 1))

    def union_contains(self, x, i: int) -> bool:
        """Membership in B_i = Omega_1 u ... u Omega_i."""
        if not 1 <= i <= self.length:
            raise IndexError(f"union index {i} out of range")
        return any(self.regions[k].contains(x) for k in range(i))

    def control(self, i: int):
        if i <= 1:
            return None
        return self.controls[i - 1]


class LazySetChain:
    """Countable chain materialized on demand from a generator.

    ``generator(j)`` (j >= 2) returns (region, control) or None when the
    chain is exhausted. When ``disjoint_tail`` is set the tail regions are
    promised pairwise disjoint, so a ``locator`` hint (x -> candidate index)
    classifies in O(1); otherwise classification scans from index 2 upward,
    extending the materialized prefix. Extension is lock-protected so
    concurrent classify calls observe a consistent prefix.
    """

    mode = "locally_finite"

    def __init__(self, theta: Region, generator: Callable, locator: Optional[Callable] = None,
                 disjoint_tail: bool = False, max_index: int = 10_000_000):
        self.theta = theta
        self.generator = generator
        self.locator = locator
        self.disjoint_tail = disjoint_tail
        self.max_index = max_index
        self._links = {}
        self._exhausted_at = None
        self._lock = threading.Lock()

    @property
    def length(self) -> Optional[int]:
        return None if self._exhausted_at is None else self._exhausted_at - 1

    def materialized_indices(self) -> tuple:
        with self._lock:
            return tuple(sorted(self._links))

    def _link(self, j: int):
        with self._lock:
            if j in self._links:
                return self._links[j]
            if self._exhausted_at is not None and j >= self._exhausted_at:
                return None
            link = self.generator(j)
            if link is None:
                self._exhausted_at = j if self._exhausted_at is None else min(self._exhausted_at, j)
                return None
            region, control = link
            link = (region, tuple(control))
            self._links[j] = link
            return link

    def classify(self, x) -> int:
        if self.theta.contains(x):
            return 1
        if self.locator is not None and self.disjoint_tail:
            j = int(self.locator(x))
            if j >= 2:
                link = self._link(j)
                if link is not None and link[0].contains(x):
                    return j
            # fall through to the scan if the hint missed
        j = 2
        while j <= self.max_index:
            link = self._link(j)
            if link is None:
                raise NotCovered(f"x = {tuple(x)} outside the (exhausted) chain union")
            if link[0].contains(x):
                return j
            j += 1
        raise NotCovered(f"no covering region for x = {tuple(x)} within index {self.max_index}")

    def cell_contains(self, x, i: int) -> bool:
        if i == 1:
            return self.theta.contains(x)
        if self.theta.contains(x):
            return False
        link = self._link(i)
        if link is None or not link[0].contains(x):
            return False
        for k in range(2, i):
            lk = self._link(k)
            if lk is not None and lk[0].contains(x):
                return False
        return True

    def union_contains(self, x, i: int) -> bool:
        if self.theta.contains(x):
            return True
        for k in range(2, i + 1):
            lk = self._link(k)
            if lk is not None and lk[0].contains(x):
                return True
        return False

    def control(self, i: int):
        if i <= 1:
            return None
        link = self._link(i)
        if link is None:
            raise NotCovered(f"chain has no cell {i}")
        return link[1]


def decompose(regions: Sequence[Region], controls: Optional[Sequence] = None) -> SetChain:
    """Build the finite chain with derived cells/unions from ordered regions."""
    return SetChain(regions, controls)


# ---------------------------------------------------------------------------
# Piecewise feedback
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseFeedback:
    """Inner feedback on Theta plus one constant control per outer cell.

    period = min(h_tilde, r); both ingredients are recorded.
    """

    inner: Callable
    chain: object
    h_tilde: float
    r: float
    period: float = field(init=False)

    def __post_init__(self):
        if self.h_tilde <= 0.0 or self.r <= 0.0:
            raise ValueError("h_tilde and r must be positive")
        object.__setattr__(self, "period", min(self.h_tilde, self.r))

    def classify_cell(self, x) -> int:
        return self.chain.classify(x)

    def control_for_cell(self, cell: int, x) -> tuple:
        if cell == 1:
            return tuple(self.inner(x))
        return self.chain.control(cell)

    def evaluate(self, x) -> tuple:
        return self.control_for_cell(self.classify_cell(x), x)


def synthesize(k_inner: Callable, theta: Region, h_tilde: float,
               regions: Sequence[Region], controls: Sequence,
               r: float, control_set: Optional[Box] = None) -> PiecewiseFeedback:
    """Assemble the piecewise feedback from a finite chain.

    ``controls`` carries one constant vector per region index >= 2 (so
    len(controls) == len(regions) - 1).
    """
    if not regions:
        raise EmptyChain("need at least one region")
    if regions[0] is not theta and regions[0] != theta:
        raise ChainHeadMismatch("chain head Omega_1 must be Theta")
    if len(controls) != len(regions) - 1:
        raise ValueError("need exactly one control per region index >= 2")
    controls = [tuple(float(v) for v in c) for c in controls]
    if control_set is not None:
        for idx, c in enumerate(controls, start=2):
            if not control_set.contains(c):
                raise ControlOutOfSet(f"v_{idx} = {c} outside U")
    chain = SetChain(regions, (None, *controls))
    return PiecewiseFeedback(inner=k_inner, chain=chain, h_tilde=h_tilde, r=r)


def synthesize_lazy(k_inner: Callable, theta: Region, h_tilde: float,
                    generator: Callable, r: float,
                    locator: Optional[Callable] = None, disjoint_tail: bool = False,
                    control_set: Optional[Box] = None,
                    max_index: int = 10_000_000) -> PiecewiseFeedback:
    """Assemble a feedback over a countable generator-backed chain."""
    if control_set is not None:
        raw = generator

        def checked(j, _raw=raw, _set=control_set):
            link = _raw(j)
            if link is None:
                return None
            region, control = link
            control = tuple(float(v) for v in control)
            if not _set.contains(control):
                raise ControlOutOfSet(f"v_{j} = {control} outside U")
            return region, control

        generator = checked
    chain = LazySetChain(theta, generator, locator=locator,
                         disjoint_tail=disjoint_tail, max_index=max_index)
    return PiecewiseFeedback(inner=k_inner, chain=chain, h_tilde=h_tilde, r=r)
