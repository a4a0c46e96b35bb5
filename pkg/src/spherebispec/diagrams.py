"""Brute-force Gaussian moments of the normalised bispectrum via diagrams.

For a Gaussian field, ``E I^{2p}`` expands by Isserlis' theorem into a sum
over perfect matchings ("diagrams") of the cells of a ``2p x 3`` grid.  Row
``i`` of the grid holds one copy of the triple ``(l1, l2, l3)``; an edge
between two cells forces equal multipoles, opposite orders ``m' = -m`` and
carries a factor ``(-1)^m``.  The value of a diagram is the resulting
contraction of one 3j symbol per row, which we evaluate exactly over all
orders with dense tensors.

Cells are numbered ``3 * row + col`` with 0-based rows and columns.
"""
from __future__ import annotations

import math
import string
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, ParityError, ResourceGuardError
from .wigner import triangle_ok, wigner_3j_tensor, wigner_6j

__all__ = [
    "Diagram",
    "DiagramClass",
    "all_pairings",
    "enumerate_diagrams",
    "classify",
    "diagram_value",
    "moment_bruteforce",
    "paired_family_value",
    "reduce_two_loop",
    "reduce_three_loop",
    "verify_loop_reduction",
    "MAX_L3",
    "MAX_P",
]

MAX_L3 = 6
MAX_P = 2

Edge = tuple[int, int]


@dataclass(frozen=True)
class Diagram:
    """Perfect matching of the ``3 * n_rows`` cells; edges sorted canonically."""

    n_rows: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        cells = sorted(c for e in self.edges for c in e)
        if cells != list(range(3 * self.n_rows)):
            raise DomainError("edges must cover every cell exactly once")

    @classmethod
    def from_edges(cls, n_rows: int, edges) -> "Diagram":
        canon = tuple(sorted(tuple(sorted((int(a), int(b)))) for a, b in edges))
        return cls(n_rows, canon)

    @classmethod
    def from_cells(cls, n_rows: int, pairs) -> "Diagram":
        """Build from ``((row, col), (row, col))`` pairs."""
        return cls.from_edges(n_rows, [(3 * r1 + c1, 3 * r2 + c2) for (r1, c1), (r2, c2) in pairs])

    @property
    def p(self) -> int:
        return self.n_rows // 2

    def cell_edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        return [(divmod(a, 3), divmod(b, 3)) for a, b in self.edges]

    def partner(self, cell: int) -> int:
        for a, b in self.edges:
            if a == cell:
                return b
            if b == cell:
                return a
        raise KeyError(cell)


@dataclass(frozen=True)
class DiagramClass:
    has_flat_edge: bool
    connected: bool
    paired: bool
    min_loop_order: int | None

    @property
    def category(self) -> str:
        """One of the four disjoint families: paired, flat, connected, disconnected."""
        if self.paired:
            return "paired"
        if self.has_flat_edge:
            return "flat"
        return "connected" if self.connected else "disconnected"


def all_pairings(items: Sequence[int]) -> Iterator[tuple[Edge, ...]]:
    """All perfect matchings of ``items`` (even length), each as a tuple of pairs."""
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for k in range(len(rest)):
        pair = (first, rest[k])
        remaining = rest[:k] + rest[k + 1:]
        for tail in all_pairings(remaining):
            yield (pair,) + tail


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def enumerate_diagrams(p: int) -> list[Diagram]:
    """All ``(6p - 1)!!`` diagrams on ``2p`` rows."""
    if p < 1:
        raise DomainError("p must be positive")
    if p > MAX_P:
        raise ResourceGuardError(f"p={p} gives {_double_factorial(6 * p - 1)} diagrams; limit is p<={MAX_P}")
    n = 2 * p
    return [Diagram(n, tuple(sorted(e))) for e in all_pairings(list(range(3 * n)))]


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

def _row_multigraph(d: Diagram) -> list[tuple[int, int]]:
    return [(a // 3, b // 3) for a, b in d.edges]


def _min_cycle(n: int, links: list[tuple[int, int]]) -> int | None:
    if any(a == b for a, b in links):
        return 1
    seen: set[tuple[int, int]] = set()
    for a, b in links:
        key = (min(a, b), max(a, b))
        if key in seen:
            return 2
        seen.add(key)
    adj: dict[int, list[int]] = {v: [] for v in range(n)}
    for a, b in seen:
        adj[a].append(b)
        adj[b].append(a)
    best = None
    for root in range(n):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    parent[w] = v
                    queue.append(w)
                elif parent[v] != w:
                    length = dist[v] + dist[w] + 1
                    best = length if best is None else min(best, length)
    return best


def classify(d: Diagram) -> DiagramClass:
    links = _row_multigraph(d)
    flat = any(a == b for a, b in links)
    # connectivity of the row multigraph
    adj: dict[int, set[int]] = {v: set() for v in range(d.n_rows)}
    for a, b in links:
        adj[a].add(b)
        adj[b].add(a)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v] - seen:
            seen.add(w)
            stack.append(w)
    connected = len(seen) == d.n_rows
    # paired: every row sends all three edges to one other row
    paired = all(len(adj[v]) == 1 and v not in adj[v] for v in range(d.n_rows))
    return DiagramClass(flat, connected, paired, _min_cycle(d.n_rows, links))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _check_triple(l1: int, l2: int, l3: int, require_even: bool = True) -> None:
    if min(l1, l2, l3) < 0:
        raise DomainError("multipoles must be nonnegative")
    if not triangle_ok(l1, l2, l3):
        raise DomainError(f"triangle rule fails for ({l1},{l2},{l3})")
    if require_even and (l1 + l2 + l3) % 2:
        raise ParityError(f"odd l1+l2+l3 for ({l1},{l2},{l3})")
    if max(l1, l2, l3) > MAX_L3:
        raise ResourceGuardError(f"max multipole {max(l1, l2, l3)} exceeds the oracle limit {MAX_L3}")


@lru_cache(maxsize=64)
def _row_tensor(l1: int, l2: int, l3: int, flips: tuple[bool, bool, bool]) -> np.ndarray:
    """3j tensor with selected axes reversed (m -> -m) and weighted by (-1)^m."""
    t = wigner_3j_tensor(l1, l2, l3)
    ls = (l1, l2, l3)
    for axis, flip in enumerate(flips):
        if flip:
            t = np.flip(t, axis=axis)
            alt = np.where(np.arange(-ls[axis], ls[axis] + 1) % 2 == 0, 1.0, -1.0)
            shape = [1, 1, 1]
            shape[axis] = -1
            t = t * alt.reshape(shape)
    t = np.ascontiguousarray(t)
    t.setflags(write=False)
    return t


def _value(d: Diagram, ls: tuple[int, int, int]) -> float:
    letters = string.ascii_letters
    subs = [["", "", ""] for _ in range(d.n_rows)]
    flips = [[False, False, False] for _ in range(d.n_rows)]
    for k, (a, b) in enumerate(d.edges):
        ra, ca = divmod(a, 3)
        rb, cb = divmod(b, 3)
        if ls[ca] != ls[cb]:
            return 0.0
        subs[ra][ca] = letters[k]
        subs[rb][cb] = letters[k]
        flips[rb][cb] = True
    operands = [_row_tensor(*ls, tuple(f)) for f in flips]
    spec = ",".join("".join(s) for s in subs) + "->"
    return float(np.einsum(spec, *operands, optimize="greedy"))


def diagram_value(d: Diagram, l1: int, l2: int, l3: int, *, require_even: bool = True) -> float:
    """Exact value of one diagram at the triple ``(l1, l2, l3)``.

    Odd-sum triples are rejected unless ``require_even=False`` (the value is
    still well defined algebraically).
    """
    _check_triple(l1, l2, l3, require_even)
    return _value(d, (l1, l2, l3))


def moment_bruteforce(p: int, l1: int, l2: int, l3: int) -> float:
    """``E I^{2p}`` for a Gaussian field: the sum of all diagram values."""
    _check_triple(l1, l2, l3)
    ls = (l1, l2, l3)
    return math.fsum(_value(d, ls) for d in enumerate_diagrams(p))


def paired_family_value(p: int, l1: int, l2: int, l3: int) -> float:
    """Sum of the values of the paired diagrams only."""
    _check_triple(l1, l2, l3)
    ls = (l1, l2, l3)
    return math.fsum(_value(d, ls) for d in enumerate_diagrams(p) if classify(d).paired)


# --------------------------------------------------------------------------
# loop reductions
# --------------------------------------------------------------------------

def _relabel(edges_rc, keep_rows: list[int]) -> Diagram:
    index = {r: k for k, r in enumerate(keep_rows)}
    return Diagram.from_cells(len(keep_rows), [((index[r1], c1), (index[r2], c2))
                                                for (r1, c1), (r2, c2) in edges_rc])


def reduce_two_loop(d: Diagram, i1: int, i2: int) -> tuple[Diagram, int]:
    """Cut rows ``i1, i2`` joined by two edges; join their remaining partners.

    Returns the reduced diagram and the column ``j3`` of the cut edge on row ``i1``.
    """
    edges = d.cell_edges()
    between = [e for e in edges if {e[0][0], e[1][0]} == {i1, i2}]
    if len(between) != 2 or i1 == i2:
        raise DomainError(f"rows {i1} and {i2} are not joined by exactly two edges")
    out1 = [e for e in edges if (e[0][0] == i1) != (e[1][0] == i1) and e not in between]
    out2 = [e for e in edges if (e[0][0] == i2) != (e[1][0] == i2) and e not in between]
    if len(out1) != 1 or len(out2) != 1:
        raise DomainError("each cut row must have exactly one outside edge")
    (c1, o1), = [(a, b) if a[0] == i1 else (b, a) for a, b in out1]
    (c2, o2), = [(a, b) if a[0] == i2 else (b, a) for a, b in out2]
    if o1[0] in (i1, i2) or o2[0] in (i1, i2):
        raise DomainError("outside edges must leave the loop")
    rest = [e for e in edges if e not in between and e not in out1 and e not in out2]
    rest.append((o1, o2))
    keep = [r for r in range(d.n_rows) if r not in (i1, i2)]
    return _relabel(rest, keep), c1[1]


def reduce_three_loop(d: Diagram, i1: int, i2: int, i3: int) -> Diagram:
    """Merge rows ``i1, i2, i3`` forming a 3-loop into row ``i1``.

    Each of the three rows keeps one outside edge; in the reduced diagram
    those cells move to row ``i1`` in their original columns, which must
    therefore be distinct.
    """
    rows = {i1, i2, i3}
    if len(rows) != 3:
        raise DomainError("need three distinct rows")
    edges = d.cell_edges()
    loop = [e for e in edges if e[0][0] in rows and e[1][0] in rows]
    pairs = {frozenset((a[0], b[0])) for a, b in loop}
    if len(loop) != 3 or pairs != {frozenset((i1, i2)), frozenset((i2, i3)), frozenset((i1, i3))}:
        raise DomainError(f"rows {i1},{i2},{i3} do not form a 3-loop")
    new_edges = []
    cols_used = []
    for a, b in edges:
        if (a, b) in loop:
            continue
        if a[0] in rows:
            cols_used.append(a[1])
            a = (i1, a[1])
        if b[0] in rows:
            cols_used.append(b[1])
            b = (i1, b[1])
        new_edges.append((a, b))
    if sorted(cols_used) != [0, 1, 2]:
        raise DomainError("outside edges of the loop do not cover three distinct columns")
    keep = [r for r in range(d.n_rows) if r not in (i2, i3)]
    return _relabel(new_edges, keep)


def _find_two_loop(d: Diagram) -> tuple[int, int]:
    for i1 in range(d.n_rows):
        for i2 in range(i1 + 1, d.n_rows):
            try:
                reduce_two_loop(d, i1, i2)
                return i1, i2
            except DomainError:
                continue
    raise DomainError("diagram has no reducible 2-loop")


def _find_three_loop(d: Diagram) -> tuple[int, int, int]:
    n = d.n_rows
    for i1 in range(n):
        for i2 in range(i1 + 1, n):
            for i3 in range(i2 + 1, n):
                try:
                    reduce_three_loop(d, i1, i2, i3)
                    return i1, i2, i3
                except DomainError:
                    continue
    raise DomainError("diagram has no reducible 3-loop")


def verify_loop_reduction(d: Diagram, kind: str, l1: int, l2: int, l3: int,
                          rows: tuple[int, ...] | None = None,
                          *, require_even: bool = True) -> tuple[float, float]:
    """Both sides of a loop-reduction identity.

    ``kind="two_loop"``: ``D[d] = D[d_R] / (2 l_j3 + 1)``.
    ``kind="three_loop"``: ``D[d] = {l1 l2 l3; l1 l2 l3} D[d_R]``.

    ``rows`` names the rows to reduce; by default the first admissible choice
    in lexicographic order is used.  With ``require_even=False`` odd-sum
    triples are accepted and the right side carries the extra factor
    ``(-1)^(l1+l2+l3)``.
    """
    c = classify(d)
    if not c.connected or c.has_flat_edge:
        raise DomainError("loop reductions apply to connected diagrams without flat edges")
    ls = (l1, l2, l3)
    if any(ls[a % 3] != ls[b % 3] for a, b in d.edges):
        raise DomainError("diagram vanishes identically: an edge joins unequal multipoles")
    lhs = diagram_value(d, l1, l2, l3, require_even=require_even)
    # an odd total picks up the parity of the 3j symbol under m -> -m
    sign = -1.0 if (l1 + l2 + l3) % 2 else 1.0
    if kind == "two_loop":
        if c.min_loop_order != 2:
            raise DomainError("diagram has no 2-loop")
        i1, i2 = rows if rows is not None else _find_two_loop(d)
        reduced, j3 = reduce_two_loop(d, i1, i2)
        rhs = sign * diagram_value(reduced, l1, l2, l3, require_even=require_even) / (2 * ls[j3] + 1)
    elif kind == "three_loop":
        if c.min_loop_order != 3:
            raise DomainError("diagram's shortest loop is not a 3-loop")
        i1, i2, i3 = rows if rows is not None else _find_three_loop(d)
        reduced = reduce_three_loop(d, i1, i2, i3)
        rhs = sign * wigner_6j(l1, l2, l3, l1, l2, l3) * diagram_value(reduced, l1, l2, l3,
                                                                 require_even=require_even)
    else:
        raise DomainError(f"unknown reduction kind {kind!r}")
    return lhs, rhs
