"""Report-style summaries for every community at every hierarchy level.

Leaf communities are summarized from their element summaries, packed in
priority order under a token budget. Higher levels start from the same
packing and, when it overflows, swap whole sub-communities for their
(shorter) summaries until the context fits.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import GatewayError, InvalidConfig
from .graph import EntityGraph, combined_degree
from .leiden.structures import CommunityHierarchy
from .llm.base import ChatRequest
from .llm.codec import TokenCodec
from .llm.gateway import LLMGateway
from .prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)

SEPARATOR = "\n"


@dataclass(frozen=True)
class PackingBudget:
    context_limit_tokens: int = 8000
    summary_limit_tokens: int = 2000

    def __post_init__(self) -> None:
        if self.context_limit_tokens <= 0 or self.summary_limit_tokens <= 0:
            raise InvalidConfig("packing budgets must be > 0")


@dataclass(frozen=True)
class ContextItem:
    kind: str  # entity | relationship | claim | community
    ref: str
    text: str


@dataclass
class PackedContext:
    text: str
    token_count: int
    ledger: list[ContextItem]
    under_packed: bool = False
    # sub-communities whose summary replaced their elements, in substitution order
    substituted: list[str] = field(default_factory=list)

    @property
    def refs(self) -> list[str]:
        return [item.ref for item in self.ledger]


def community_ref(level: int, community: int) -> str:
    return f"{level}.{community}"


@dataclass
class CommunitySummary:
    level: int
    community_id: int
    title: str
    body: str
    token_count: int
    context_token_count: int
    inputs_used: list[str]
    node_count: int = 0
    substituted: list[str] = field(default_factory=list)
    under_packed: bool = False
    degraded: bool = False
    # copied from the single sub-community with the same members
    reused: bool = False

    @property
    def ref(self) -> str:
        return community_ref(self.level, self.community_id)

    @property
    def text(self) -> str:
        return report_text(self.title, self.body)

    def to_record(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_record(cls, data: dict) -> "CommunitySummary":
        return cls(**data)


def report_text(title: str, body: str) -> str:
    return f"# {title}\n\n{body}" if body else f"# {title}"


# -- context items ----------------------------------------------------------


def _entity_item(graph: EntityGraph, label: str) -> ContextItem:
    node = graph.node(label)
    head = f"{node.name} ({node.type})" if node.type else node.name
    text = f"[entity] {head}: {node.description}".strip() if node.description else f"[entity] {head}"
    return ContextItem("entity", label, text)


def _edge_item(graph: EntityGraph, pair: tuple[str, str]) -> ContextItem:
    e = graph.edge(*pair)
    a, b = graph.node(e.source).name, graph.node(e.target).name
    return ContextItem("relationship", f"{e.source}|{e.target}", f"[relationship] {a} -> {b}: {e.description}".strip())


def _claim_items(graph: EntityGraph, label: str) -> list[ContextItem]:
    name = graph.node(label).name
    return [ContextItem("claim", c.id, f"[claim] {name}: {c.description}".strip()) for c in graph.covariates.get(label, [])]


def _community_edges(graph: EntityGraph, members: set[str]) -> list[tuple[str, str]]:
    pairs = {e.pair for label in members for e in (graph.edges[i] for i in graph.adjacency[label])
             if e.source in members and e.target in members}
    # highest combined degree first; ties by endpoint labels
    return sorted(pairs, key=lambda p: (-combined_degree(graph, p), p))


def element_items(graph: EntityGraph, members: Iterable[str], exclude: set[str] = frozenset()) -> list[ContextItem]:
    """All element items of a community in priority order.

    Edges go by decreasing combined degree; each contributes its source node,
    target node, their claims and then its own description, skipping anything
    already listed. Nodes not reached through an edge follow by decreasing
    degree. Nodes in ``exclude`` (and their claims) are left out, but edges
    touching them are kept.
    """
    members = set(members)
    items: list[ContextItem] = []
    seen: set[tuple[str, str]] = set()

    def add(item: ContextItem) -> None:
        if (item.kind, item.ref) not in seen:
            seen.add((item.kind, item.ref))
            items.append(item)

    def add_node(label: str) -> None:
        if label in exclude:
            return
        add(_entity_item(graph, label))

    for pair in _community_edges(graph, members):
        add_node(pair[0])
        add_node(pair[1])
        for label in pair:
            if label not in exclude:
                for claim in _claim_items(graph, label):
                    add(claim)
        add(_edge_item(graph, pair))
    rest = sorted(members - exclude, key=lambda label: (-graph.node(label).degree, label))
    for label in rest:
        add_node(label)
        for claim in _claim_items(graph, label):
            add(claim)
    return items


# -- packing ----------------------------------------------------------------


def _item_cost(codec: TokenCodec, item: ContextItem, first: bool) -> int:
    return codec.count(item.text if first else SEPARATOR + item.text)


def _join(items: Sequence[ContextItem]) -> str:
    return SEPARATOR.join(item.text for item in items)


def pack_items(items: Sequence[ContextItem], limit: int, codec: TokenCodec) -> PackedContext:
    """Greedy prefix: add items in order and stop at the first that overflows."""
    packed: list[ContextItem] = []
    used = 0
    under = False
    for item in items:
        cost = _item_cost(codec, item, not packed)
        if used + cost > limit:
            under = True
            break
        packed.append(item)
        used += cost
    text = _join(packed)
    count = codec.count(text)
    # guard for codecs whose counts are not additive across the separator
    while count > limit and packed:
        packed.pop()
        under = True
        text = _join(packed)
        count = codec.count(text)
    return PackedContext(text, count, packed, under_packed=under)


def pack_leaf_context(
    graph: EntityGraph, members: Iterable[str], budget: PackingBudget, codec: TokenCodec
) -> PackedContext:
    return pack_items(element_items(graph, members), budget.context_limit_tokens, codec)


@dataclass(frozen=True)
class SubCommunity:
    ref: str
    members: frozenset[str]
    summary_text: str


def _cost(items: Sequence[ContextItem], codec: TokenCodec) -> int:
    return sum(_item_cost(codec, item, i == 0) for i, item in enumerate(items))


def pack_hierarchical_context(
    graph: EntityGraph,
    members: Iterable[str],
    subs: Sequence[SubCommunity],
    budget: PackingBudget,
    codec: TokenCodec,
) -> PackedContext:
    """Pack a community that has sub-communities with existing summaries.

    If every element fits this is exactly :func:`pack_leaf_context`.
    Otherwise sub-communities are ranked by the tokens of their own elements
    (largest first) and replaced by their summaries one at a time until the
    whole context fits. A replacement is only made when the summary is
    shorter than the elements it stands for. If nothing fits even then, the
    sub-community summaries are greedily packed alone in rank order.
    """
    members = list(members)
    limit = budget.context_limit_tokens
    leaf = pack_leaf_context(graph, members, budget, codec)
    if not leaf.under_packed:
        return leaf

    def summary_item(sub: SubCommunity) -> ContextItem:
        return ContextItem("community", sub.ref, sub.summary_text)

    weights = {sub.ref: _cost(element_items(graph, sub.members), codec) for sub in subs}
    ranked = sorted(subs, key=lambda s: (-weights[s.ref], s.ref))

    chosen: list[SubCommunity] = []
    excluded: set[str] = set()
    total = _cost(element_items(graph, members), codec)
    for sub in ranked:
        trial_excluded = excluded | sub.members
        trial = [summary_item(s) for s in chosen + [sub]] + element_items(graph, members, trial_excluded)
        trial_total = _cost(trial, codec)
        if trial_total >= total:
            continue
        chosen.append(sub)
        excluded = trial_excluded
        total = trial_total
        if total <= limit:
            packed = pack_items(trial, limit, codec)
            if not packed.under_packed:
                packed.substituted = [s.ref for s in chosen]
                return packed

    packed = pack_items([summary_item(s) for s in ranked], limit, codec)
    packed.under_packed = True
    packed.substituted = [item.ref for item in packed.ledger]
    return packed


# -- summarization ----------------------------------------------------------

_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


def parse_report(text: str) -> tuple[str, str] | None:
    match = _JSON_OBJECT.search(text or "")
    if not match:
        return None
    try:
        data = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict):
        return None
    title, body = data.get("title"), data.get("summary")
    if not isinstance(title, str) or not isinstance(body, str) or not title.strip():
        return None
    return title.strip(), body.strip()


def fit_report(title: str, body: str, limit: int, codec: TokenCodec) -> tuple[str, str]:
    """Shorten the body (then the title) until the rendered report fits."""
    title = " ".join(title.split())
    while codec.count(report_text(title, body)) > limit:
        excess = codec.count(report_text(title, body)) - limit
        n = codec.count(body)
        if n == 0:
            title = codec.take_prefix(title, max(0, codec.count(title) - max(excess, 1)))
            continue
        body = codec.take_prefix(body, max(0, n - max(excess, 1))).rstrip()
    return title, body


class CommunitySummarizer:
    def __init__(
        self,
        gateway: LLMGateway,
        budget: PackingBudget | None = None,
        prompts: PromptSet = DEFAULT_PROMPTS,
        seed: int = 0,
    ):
        self.gw = gateway
        self.codec = gateway.codec
        self.budget = budget or PackingBudget()
        self.prompts = prompts
        self.seed = seed

    def _default_title(self, level: int, community: int) -> str:
        return f"Community {community_ref(level, community)}"

    def summarize(self, level: int, community: int, members: Sequence[str], context: PackedContext) -> CommunitySummary:
        limit = self.budget.summary_limit_tokens
        title, body, degraded = self._default_title(level, community), "", True
        if context.ledger:
            prompt = self.prompts.render("community_report", max_tokens=limit, context=context.text)
            try:
                reply = self.gw.chat(ChatRequest.of(prompt, max_output_tokens=limit, seed=self.seed)).text
            except GatewayError as exc:
                log.warning("community %s report degraded: %s", community_ref(level, community), exc)
                reply = None
            parsed = parse_report(reply) if reply is not None else None
            if parsed:
                title, body = parsed
                degraded = False
            else:
                # fall back to the packed context itself
                body = context.text
        title, body = fit_report(title, body, limit, self.codec)
        return CommunitySummary(
            level=level,
            community_id=community,
            title=title,
            body=body,
            token_count=self.codec.count(report_text(title, body)),
            context_token_count=context.token_count,
            inputs_used=context.refs,
            node_count=len(members),
            substituted=list(context.substituted),
            under_packed=context.under_packed,
            degraded=degraded,
        )

    def summarize_all(
        self, hierarchy: CommunityHierarchy, graph: EntityGraph
    ) -> dict[tuple[int, int], CommunitySummary]:
        """Deepest level first; each level waits for the one below it."""
        out: dict[tuple[int, int], CommunitySummary] = {}
        for level in range(hierarchy.depth - 1, -1, -1):
            groups = hierarchy.communities(level)
            jobs = []
            for c, members in enumerate(groups):
                kids = hierarchy.children(level, c)
                if len(kids) == 1:
                    child = out[(level + 1, kids[0])]
                    out[(level, c)] = CommunitySummary(
                        **{**child.to_record(), "level": level, "community_id": c, "reused": True}
                    )
                    continue
                jobs.append((c, members, kids))

            def run(job) -> CommunitySummary:
                c, members, kids = job
                if kids:
                    below = hierarchy.communities(level + 1)
                    subs = [
                        SubCommunity(community_ref(level + 1, k), frozenset(below[k]), out[(level + 1, k)].text)
                        for k in kids
                    ]
                    context = pack_hierarchical_context(graph, members, subs, self.budget, self.codec)
                else:
                    context = pack_leaf_context(graph, members, self.budget, self.codec)
                return self.summarize(level, c, members, context)

            for (c, _, _), summary in zip(jobs, self.gw.map(run, jobs)):
                out[(level, c)] = summary
        return dict(sorted(out.items()))


def summarize_all_communities(
    hierarchy: CommunityHierarchy,
    graph: EntityGraph,
    gw: LLMGateway,
    budget: PackingBudget | None = None,
    **kwargs,
) -> dict[tuple[int, int], CommunitySummary]:
    return CommunitySummarizer(gw, budget, **kwargs).summarize_all(hierarchy, graph)


def summary_counts(summaries: Iterable[CommunitySummary]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for s in summaries:
        counts[s.level] = counts.get(s.level, 0) + 1
    return dict(sorted(counts.items()))
