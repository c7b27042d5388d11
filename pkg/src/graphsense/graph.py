"""Undirected weighted entity graph built from element summaries."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .elements import ElementSummary
from .errors import UnknownEdge
from .leiden.structures import WeightedGraph


def node_label(name: str, type_: str) -> str:
    return f"{name}::{type_}" if type_ else name


@dataclass(frozen=True)
class EntityNode:
    label: str
    name: str
    type: str
    description: str
    degree: int
    token_count: int
    instance_count: int
    placeholder: bool = False

    def to_record(self) -> dict:
        return {"record": "node", **self.__dict__}


@dataclass(frozen=True)
class RelationshipEdge:
    source: str
    target: str
    description: str
    weight: float
    normalized_weight: float
    instance_count: int
    token_count: int

    @property
    def pair(self) -> tuple[str, str]:
        return (self.source, self.target)

    def to_record(self) -> dict:
        return {"record": "edge", **self.__dict__}


@dataclass
class EntityGraph:
    nodes: list[EntityNode] = field(default_factory=list)
    edges: list[RelationshipEdge] = field(default_factory=list)
    # node label -> claim summaries whose subject is that node, in extraction order
    covariates: dict[str, list[ElementSummary]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.node_index = {n.label: i for i, n in enumerate(self.nodes)}
        self.edge_index = {e.pair: i for i, e in enumerate(self.edges)}
        self.adjacency: dict[str, list[int]] = {n.label: [] for n in self.nodes}
        for i, e in enumerate(self.edges):
            self.adjacency[e.source].append(i)
            self.adjacency[e.target].append(i)

    def node(self, label: str) -> EntityNode:
        return self.nodes[self.node_index[label]]

    def edge(self, a: str, b: str) -> RelationshipEdge:
        pair = (a, b) if a <= b else (b, a)
        try:
            return self.edges[self.edge_index[pair]]
        except KeyError:
            raise UnknownEdge(f"no edge between {a!r} and {b!r}") from None

    def neighbors(self, label: str) -> list[str]:
        out = []
        for i in self.adjacency[label]:
            e = self.edges[i]
            out.append(e.target if e.source == label else e.source)
        return out

    def to_weighted(self) -> WeightedGraph:
        return WeightedGraph(
            labels=[n.label for n in self.nodes],
            edges=[(self.node_index[e.source], self.node_index[e.target], e.weight) for e in self.edges],
        )

    def to_records(self) -> list[dict]:
        records = [n.to_record() for n in self.nodes] + [e.to_record() for e in self.edges]
        for label in sorted(self.covariates):
            for c in self.covariates[label]:
                records.append({"record": "covariate", "node": label, "claim": c.to_record()})
        return records

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "EntityGraph":
        nodes, edges = [], []
        covariates: dict[str, list[ElementSummary]] = defaultdict(list)
        for r in records:
            r = dict(r)
            kind = r.pop("record")
            if kind == "node":
                nodes.append(EntityNode(**r))
            elif kind == "edge":
                edges.append(RelationshipEdge(**r))
            else:
                covariates[r["node"]].append(ElementSummary.from_record(r["claim"]))
        return cls(nodes, edges, dict(covariates))


def _resolver(entity_summaries: Sequence[ElementSummary]):
    by_name: dict[str, list[ElementSummary]] = defaultdict(list)
    for s in entity_summaries:
        by_name[s.key[0]].append(s)

    def resolve(name: str) -> str | None:
        candidates = by_name.get(name)
        if not candidates:
            return None
        # homonyms of different types: the most frequently extracted type wins
        best = min(candidates, key=lambda s: (-s.instance_count, s.key[1]))
        return node_label(*best.key)

    return resolve


def build_graph(
    entity_summaries: Sequence[ElementSummary],
    relationship_summaries: Sequence[ElementSummary],
    claim_summaries: Sequence[ElementSummary] = (),
) -> EntityGraph:
    """Edge weight is the relationship's instance count; ``normalized_weight``
    divides by the largest count in the graph."""
    resolve = _resolver(entity_summaries)
    merged: dict[tuple[str, str], list[ElementSummary]] = defaultdict(list)
    for r in relationship_summaries:
        a, b = resolve(r.key[0]), resolve(r.key[1])
        if a is None or b is None:
            raise UnknownEdge(f"relationship {r.key} has an endpoint with no entity")
        if a == b:
            continue
        merged[(a, b) if a <= b else (b, a)].append(r)

    max_count = max((sum(r.instance_count for r in rs) for rs in merged.values()), default=0)
    edges = []
    neighbors: dict[str, set[str]] = defaultdict(set)
    for (a, b) in sorted(merged):
        rs = merged[(a, b)]
        count = sum(r.instance_count for r in rs)
        description = "\n".join(r.description for r in rs)
        edges.append(
            RelationshipEdge(
                source=a,
                target=b,
                description=description,
                weight=float(count),
                normalized_weight=count / max_count,
                instance_count=count,
                token_count=sum(r.token_count for r in rs),
            )
        )
        neighbors[a].add(b)
        neighbors[b].add(a)

    nodes = []
    for s in sorted(entity_summaries, key=lambda s: s.key):
        label = node_label(*s.key)
        nodes.append(
            EntityNode(
                label=label,
                name=s.name,
                type=s.type,
                description=s.description,
                degree=len(neighbors[label]),
                token_count=s.token_count,
                instance_count=s.instance_count,
                placeholder=s.placeholder,
            )
        )

    covariates: dict[str, list[ElementSummary]] = defaultdict(list)
    for c in sorted(claim_summaries, key=lambda c: c.first_seen):
        label = resolve(c.key[0])
        if label is not None:
            covariates[label].append(c)
    return EntityGraph(nodes, edges, dict(covariates))


def combined_degree(graph: EntityGraph, edge: RelationshipEdge | tuple[str, str]) -> int:
    a, b = edge.pair if isinstance(edge, RelationshipEdge) else edge
    e = graph.edge(a, b)
    return graph.node(e.source).degree + graph.node(e.target).degree


def write_edge_list(graph: EntityGraph, path: Path | str) -> None:
    lines = [f"{e.source}\t{e.target}\t{e.weight!r}\n" for e in graph.edges]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_edge_list(path: Path | str) -> WeightedGraph:
    """Parse ``source<TAB>target<TAB>weight`` lines into a weighted graph."""
    labels: dict[str, int] = {}
    edges = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        a, b = parts[0], parts[1]
        w = float(parts[2]) if len(parts) > 2 else 1.0
        for x in (a, b):
            labels.setdefault(x, len(labels))
        edges.append((labels[a], labels[b], w))
    return WeightedGraph(list(labels), edges)
