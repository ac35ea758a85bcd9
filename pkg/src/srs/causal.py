"""Causal ancestry and causal-group partitioning of the live spike set.

Spikes that share any ancestor belong to one causal group; the group is the
unit of resource contention. Groups are maintained incrementally with a
union-find merged on every non-detached emission. Resource-availability
queries union the consumed ledgers of all live members plus a tombstone
ledger that preserves the consumption of garbage-collected members.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from .core import Resource, Spike


def branch(spike: Spike) -> frozenset[Spike]:
    """Transitive closure over cause edges, including the spike itself."""
    seen: set[Spike] = set()
    stack = [spike]
    while stack:
        s = stack.pop()
        if s in seen:
            continue
        seen.add(s)
        stack.extend(s.cause)
    return frozenset(seen)


def groups(spikes: Iterable[Spike]) -> list[frozenset[Spike]]:
    """Partition spikes into causal groups (shared-ancestor components).

    Computed from scratch via branch intersection closure; the incremental
    GroupTable must always agree with this.
    """
    spikes = list(spikes)
    branches = {s: branch(s) for s in spikes}
    parent = {s: s for s in spikes}

    def find(x: Spike) -> Spike:
        while parent[x] is not x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, a in enumerate(spikes):
        for b in spikes[i + 1:]:
            if branches[a] & branches[b]:
                ra, rb = find(a), find(b)
                if ra is not rb:
                    parent[rb] = ra

    buckets: dict[Spike, set[Spike]] = {}
    for s in spikes:
        buckets.setdefault(find(s), set()).add(s)
    return [frozenset(v) for v in
            sorted(buckets.values(), key=lambda g: min(s.id for s in g))]


def same_group(a: Spike, b: Spike, universe: Iterable[Spike]) -> bool:
    for g in groups(universe):
        if a in g:
            return b in g
    return False


class GroupTable:
    """Incremental causal groups over the live spike set.

    Group identity is the root spike id (smallest id in the set, kept stable
    under unions). Dead members leave their consumed entries behind in a
    per-group tombstone so availability never regresses.
    """

    def __init__(self) -> None:
        self._parent: dict[int, int] = {}
        self._members: dict[int, set[Spike]] = {}
        self._tombstone: dict[int, set[Resource]] = {}

    def add(self, spike: Spike) -> None:
        self._parent[spike.id] = spike.id
        self._members[spike.id] = {spike}
        # union with every ancestor, not just direct causes: a dead
        # multi-parent ancestor must still bridge its sides back together
        for ancestor in branch(spike) - {spike}:
            if ancestor.id in self._parent:
                self._union(spike.id, ancestor.id)

    def find(self, spike_id: int) -> int:
        root = spike_id
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[spike_id] != root:
            self._parent[spike_id], spike_id = root, self._parent[spike_id]
        return root

    def group_of(self, spike: Spike) -> int:
        return self.find(spike.id)

    def _union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # smaller id wins so group identity is deterministic
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._members.setdefault(ra, set()).update(self._members.pop(rb, ()))
        if rb in self._tombstone:
            self._tombstone.setdefault(ra, set()).update(self._tombstone.pop(rb))

    def members(self, root: int) -> frozenset[Spike]:
        return frozenset(self._members.get(self.find(root), ()))

    def ledger(self, spike: Spike) -> set[Resource]:
        """Union of consumed resources across the spike's whole group."""
        root = self.find(spike.id)
        out: set[Resource] = set(self._tombstone.get(root, ()))
        for member in self._members.get(root, ()):
            out |= member.consumed
        return out

    def resigned_rules(self, spike: Spike) -> set[str]:
        """Rules that resigned on any member of the spike's group."""
        out: set[str] = set()
        for member in self._members.get(self.find(spike.id), ()):
            out |= member.resigned_rules
        return out

    def same_group(self, a: Spike, b: Spike) -> bool:
        return self.find(a.id) == self.find(b.id)

    def retire(self, spike: Spike) -> None:
        """Drop a dead spike, preserving its consumption in the tombstone.

        A retired spike may have been the only bridge between its ancestors'
        sub-graphs; the remaining members are re-partitioned so groups always
        match a from-scratch computation over the live set. Dead ancestors
        are re-anchored to the splinter whose members still reach them (a
        later offspring of a dead ancestor must merge with exactly that
        side); ancestors no live member reaches become singleton roots.
        Tombstones are copied into every splinter.
        """
        root = self.find(spike.id)
        members = self._members.get(root)
        if members is None or spike not in members:
            return
        members.discard(spike)
        if spike.consumed:
            self._tombstone.setdefault(root, set()).update(spike.consumed)
        if not members:
            # group fully dead: forget it along with its tombstone, and
            # orphan its ancestry so stale parents cannot leak consumption
            del self._members[root]
            self._tombstone.pop(root, None)
            for ancestor in branch(spike):
                if ancestor.id in self._parent:
                    self._parent[ancestor.id] = ancestor.id
            return
        parts = groups(members)
        tomb = self._tombstone.pop(root, None)
        del self._members[root]
        claimed: dict[int, int] = {}
        for part in parts:
            new_root = min(s.id for s in part)
            for s in part:
                claimed[s.id] = new_root
                for ancestor in branch(s):
                    claimed.setdefault(ancestor.id, new_root)
            self._members[new_root] = set(part)
            if tomb:
                self._tombstone[new_root] = set(tomb)
        for anc_id, new_root in claimed.items():
            if anc_id in self._parent:
                self._parent[anc_id] = new_root
        for ancestor in branch(spike):
            if ancestor.id not in claimed and ancestor.id in self._parent:
                self._parent[ancestor.id] = ancestor.id

    def live_partition(self) -> list[frozenset[Spike]]:
        return [frozenset(v) for v in
                sorted(self._members.values(),
                       key=lambda g: min(s.id for s in g)) if v]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._members))
