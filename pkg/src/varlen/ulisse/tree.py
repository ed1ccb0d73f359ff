"""The envelope tree.

Envelopes are routed by the bits of their lower iSAX word.  A leaf holds
envelopes whose lower words agree on the leaf's per-segment prefix bits; on
overflow it refines one segment by one bit and becomes an internal node with
two children.  Every node keeps the merged word pair of its subtree
(pointwise min of lower words, pointwise max of upper words), from which
``mindist`` draws its region bounds.
"""

from __future__ import annotations

import numpy as np

from ..series import Breakpoints


class EnvelopeStore:
    """Column store of every envelope in the index."""

    def __init__(self, n_segments: int):
        self.w = n_segments
        self._rows: list[tuple] = []
        self._frozen = None

    def append(self, series_id, start, stop, n_defined, lower, upper, sym_lower, sym_upper) -> int:
        self._rows.append((series_id, start, stop, n_defined, lower, upper, sym_lower, sym_upper))
        self._frozen = None
        return len(self._rows) - 1

    def extend(self, series_id, starts, stops, n_defined, lower, upper, sym_lower, sym_upper):
        first = len(self._rows)
        for e in range(len(starts)):
            self._rows.append((series_id, int(starts[e]), int(stops[e]), int(n_defined[e]),
                               lower[e], upper[e], sym_lower[e], sym_upper[e]))
        self._frozen = None
        return range(first, len(self._rows))

    def __len__(self):
        return len(self._rows)

    def arrays(self):
        if self._frozen is None:
            w = self.w
            n = len(self._rows)
            cols = {
                "series_id": np.array([r[0] for r in self._rows], dtype=np.int64),
                "start": np.array([r[1] for r in self._rows], dtype=np.int64),
                "stop": np.array([r[2] for r in self._rows], dtype=np.int64),
                "n_defined": np.array([r[3] for r in self._rows], dtype=np.int64),
                "lower": np.array([r[4] for r in self._rows], dtype=np.float64).reshape(n, w),
                "upper": np.array([r[5] for r in self._rows], dtype=np.float64).reshape(n, w),
                "sym_lower": np.array([r[6] for r in self._rows], dtype=np.int64).reshape(n, w),
                "sym_upper": np.array([r[7] for r in self._rows], dtype=np.int64).reshape(n, w),
            }
            self._frozen = cols
        return self._frozen

    def row(self, e: int):
        return self._rows[e]


class Node:
    __slots__ = ("bits", "prefix", "sym_lower", "sym_upper", "split", "children",
                 "entries", "size", "lo", "hi", "node_id", "env_lo", "env_hi", "stuck")

    def __init__(self, bits: np.ndarray, prefix: np.ndarray):
        w = bits.shape[0]
        self.bits = bits
        self.prefix = prefix
        self.sym_lower = np.full(w, -1, dtype=np.int64)
        self.sym_upper = np.full(w, -1, dtype=np.int64)
        self.split = -1
        self.children: list[Node] = []
        self.entries: list[int] = []
        self.size = 1
        self.lo = None
        self.hi = None
        self.node_id = -1
        self.env_lo = None
        self.env_hi = None
        self.stuck = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def absorb(self, sym_lower: np.ndarray, sym_upper: np.ndarray):
        defined = sym_lower >= 0
        merged = np.where(self.sym_lower < 0, sym_lower, np.minimum(self.sym_lower, sym_lower))
        self.sym_lower = np.where(defined, merged, self.sym_lower)
        self.sym_upper = np.maximum(self.sym_upper, sym_upper)

    def walk(self):
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def routing_symbols(sym_lower: np.ndarray) -> np.ndarray:
    # undefined segments route as symbol 0; bounds never use this value
    return np.maximum(sym_lower, 0)


class EnvelopeTree:
    def __init__(self, store: EnvelopeStore, bp: Breakpoints, leaf_capacity: int = 100):
        if leaf_capacity < 1:
            raise ValueError("leaf_capacity must be >= 1")
        self.store = store
        self.bp = bp
        self.leaf_capacity = int(leaf_capacity)
        self.total_bits = bp.bits
        w = store.w
        self.root = Node(np.zeros(w, dtype=np.int64), np.zeros(w, dtype=np.int64))
        self._finalized = False

    # -- insertion ---------------------------------------------------------

    def _next_bits(self, leaf: Node, route: np.ndarray) -> np.ndarray:
        """The bit each segment would split on next (-1 where exhausted)."""
        shift = self.total_bits - leaf.bits - 1
        return np.where(shift >= 0, (route >> np.maximum(shift, 0)) & 1, -1)

    def _child_bit(self, node: Node, e: int) -> int:
        k = node.split
        sym = max(int(self.store.row(e)[6][k]), 0)
        shift = self.total_bits - int(node.bits[k]) - 1
        return (sym >> shift) & 1

    def insert(self, e: int):
        row = self.store.row(e)
        sym_lower = np.asarray(row[6], dtype=np.int64)
        sym_upper = np.asarray(row[7], dtype=np.int64)
        node = self.root
        while True:
            node.absorb(sym_lower, sym_upper)
            if node.is_leaf:
                node.entries.append(e)
                if len(node.entries) > self.leaf_capacity:
                    # an unsplittable leaf stays so until a member differs in a next bit
                    if node.stuck is None or not np.array_equal(
                            node.stuck, self._next_bits(node, routing_symbols(sym_lower))):
                        self._split(node)
                break
            node = node.children[self._child_bit(node, e)]
        self._finalized = False

    def _split(self, leaf: Node):
        entries = np.asarray(leaf.entries, dtype=np.int64)
        sym_l = np.array([self.store.row(e)[6] for e in entries], dtype=np.int64)
        sym_u = np.array([self.store.row(e)[7] for e in entries], dtype=np.int64)
        route = routing_symbols(sym_l)
        best, best_span, best_side = -1, -1, None
        for k in range(route.shape[1]):
            used = int(leaf.bits[k])
            if used >= self.total_bits:
                continue
            side = (route[:, k] >> (self.total_bits - used - 1)) & 1
            if side.all() or not side.any():
                continue
            defined = sym_l[:, k] >= 0
            span = int(sym_u[:, k].max()) - (int(sym_l[defined, k].min()) if defined.any() else 0)
            if span > best_span:
                best, best_span, best_side = k, span, side
        if best < 0:
            # members agree on every next bit; leaf stays oversized
            leaf.stuck = self._next_bits(leaf, route[0])
            return
        leaf.stuck = None
        leaf.split = best
        for bit in (0, 1):
            bits = leaf.bits.copy()
            prefix = leaf.prefix.copy()
            bits[best] += 1
            prefix[best] = prefix[best] * 2 + bit
            child = Node(bits, prefix)
            for pos in np.flatnonzero(best_side == bit):
                child.absorb(sym_l[pos], sym_u[pos])
                child.entries.append(int(entries[pos]))
            leaf.children.append(child)
        leaf.entries = []
        for child in leaf.children:
            if len(child.entries) > self.leaf_capacity:
                self._split(child)

    # -- query support -----------------------------------------------------

    def finalize(self):
        """Assign pre-order ids, subtree sizes and cached region bounds."""
        if self._finalized:
            return
        cols = self.store.arrays()
        nodes = list(self.root.walk())
        for i, node in enumerate(nodes):
            node.node_id = i
            node.lo = self.bp.lower(node.sym_lower)
            node.hi = self.bp.upper(node.sym_upper)
            if node.is_leaf:
                idx = np.asarray(node.entries, dtype=np.int64)
                node.env_lo = self.bp.lower(cols["sym_lower"][idx]).reshape(len(idx), -1)
                node.env_hi = self.bp.upper(cols["sym_upper"][idx]).reshape(len(idx), -1)
        for node in reversed(nodes):
            node.size = 1 + sum(c.size for c in node.children)
        self._finalized = True

    def nodes(self) -> list[Node]:
        return list(self.root.walk())

    @property
    def node_count(self) -> int:
        self.finalize()
        return self.root.size

    def leaves(self) -> list[Node]:
        return [n for n in self.root.walk() if n.is_leaf]

    def audit(self) -> list[str]:
        """Check the structural invariants; returns a list of violations."""
        problems: list[str] = []
        cols = self.store.arrays()
        seen = np.zeros(len(self.store), dtype=np.int64)
        B = self.total_bits

        def region(sym_lo, sym_hi):
            return self.bp.lower(sym_lo), self.bp.upper(sym_hi)

        for node in self.root.walk():
            lo, hi = region(node.sym_lower, node.sym_upper)
            members = node.children if not node.is_leaf else node.entries
            for m in members:
                if isinstance(m, Node):
                    clo, chi = region(m.sym_lower, m.sym_upper)
                else:
                    clo, chi = region(cols["sym_lower"][m], cols["sym_upper"][m])
                if np.any(clo < lo) or np.any(chi > hi):
                    problems.append(f"containment violated under node {node.node_id}")
            if node.is_leaf:
                for e in node.entries:
                    seen[e] += 1
                    route = routing_symbols(cols["sym_lower"][e])
                    shifted = route >> (B - node.bits)
                    if np.any(shifted != node.prefix):
                        problems.append(f"envelope {e} does not match leaf prefix")
        if np.any(seen != 1):
            problems.append("envelope coverage is not exactly once")
        return problems
