from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence


@dataclass
class WeightedGraph:
    """Plain undirected weighted graph: node labels plus (i, j, weight) edges."""

    labels: list[str]
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.labels)

    def scaled(self, factor: float) -> "WeightedGraph":
        return WeightedGraph(list(self.labels), [(i, j, w * factor) for i, j, w in self.edges])

    @classmethod
    def from_edges(cls, edges: Sequence[tuple], n: int | None = None) -> "WeightedGraph":
        """Build from ``(i, j)`` or ``(i, j, w)`` tuples over integer nodes."""
        top = max((max(e[0], e[1]) for e in edges), default=-1) + 1
        n = max(n or 0, top)
        return cls(
            labels=[str(i) for i in range(n)],
            edges=[(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in edges],
        )


@dataclass(frozen=True)
class LeidenConfig:
    resolution: float = 1.0
    randomness: float = 0.01
    seed: int = 0
    max_levels: int = 4
    min_improvement: float = 1e-9
    n_starts: int = 64

    def __post_init__(self) -> None:
        if self.resolution <= 0 or self.randomness <= 0:
            raise ValueError("resolution and randomness must be > 0")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")


@dataclass
class Partition:
    """Assignment of every node label to a community index.

    ``refs[c]`` names community ``c`` as ``(hierarchy level, id at that
    level)``; for a stored level it is simply ``(level, c)``. Projections can
    mix levels, which is why the reference is kept separately.
    """

    level: int
    assignment: dict[str, int]
    refs: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.refs:
            k = max(self.assignment.values(), default=-1) + 1
            self.refs = [(self.level, c) for c in range(k)]

    @property
    def n_communities(self) -> int:
        return len(self.refs)

    def members(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in self.refs]
        for label, c in self.assignment.items():
            out[c].append(label)
        return [sorted(m) for m in out]

    def groups(self) -> Iterator[tuple[tuple[int, int], list[str]]]:
        yield from zip(self.refs, self.members())


@dataclass
class CommunityHierarchy:
    """Nested partitions, level 0 = root (coarsest).

    ``parents[k][c]`` is the level-(k-1) community containing level-k
    community ``c``; ``parents[0]`` is empty.
    """

    labels: list[str]
    levels: list[Partition]
    parents: list[dict[int, int]]

    @property
    def depth(self) -> int:
        return len(self.levels)

    def communities(self, level: int) -> list[list[str]]:
        return self.levels[level].members()

    def children(self, level: int, community: int) -> list[int]:
        if level + 1 >= self.depth:
            return []
        return sorted(c for c, p in self.parents[level + 1].items() if p == community)

    def is_split(self, level: int, community: int) -> bool:
        """True when the community has two or more sub-communities below it."""
        return len(self.children(level, community)) > 1

    def to_records(self) -> list[dict]:
        records = []
        for k, part in enumerate(self.levels):
            members = part.members()
            for c in range(part.n_communities):
                records.append(
                    {
                        "level": k,
                        "community": c,
                        "parent": self.parents[k].get(c) if k else None,
                        "nodes": members[c],
                    }
                )
        return records

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "CommunityHierarchy":
        depth = max((r["level"] for r in records), default=-1) + 1
        assignments: list[dict[str, int]] = [{} for _ in range(depth)]
        parents: list[dict[int, int]] = [{} for _ in range(depth)]
        for r in records:
            for label in r["nodes"]:
                assignments[r["level"]][label] = r["community"]
            if r["parent"] is not None:
                parents[r["level"]][r["community"]] = r["parent"]
        labels = sorted(assignments[0]) if depth else []
        levels = [Partition(k, a) for k, a in enumerate(assignments)]
        return cls(labels, levels, parents)
