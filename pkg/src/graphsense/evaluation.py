"""Question generation and head-to-head LLM-as-judge comparison."""

from __future__ import annotations

import itertools
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import GatewayError, InvalidConfig, JudgeFailed
from .llm.base import ChatRequest
from .llm.gateway import LLMGateway
from .prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metric:
    name: str
    rubric: str


BUILTIN_METRICS: dict[str, Metric] = {
    m.name: m
    for m in (
        Metric(
            "comprehensiveness",
            "How much detail does the answer provide to cover all aspects and details of the question?",
        ),
        Metric(
            "diversity",
            "How varied and rich is the answer in providing different perspectives and insights on the question?",
        ),
        Metric(
            "empowerment",
            "How well does the answer help the reader understand and make informed judgements about the topic?",
        ),
        Metric("directness", "How specifically and clearly does the answer address the question?"),
    )
}


def resolve_metrics(names: str | Sequence[str]) -> list[Metric]:
    if isinstance(names, str):
        names = list(BUILTIN_METRICS) if names == "all" else [n.strip() for n in names.split(",") if n.strip()]
    unknown = [n for n in names if n not in BUILTIN_METRICS]
    if unknown:
        raise InvalidConfig(f"unknown metrics: {', '.join(unknown)}")
    return [BUILTIN_METRICS[n] for n in names]


# -- question generation ----------------------------------------------------


@dataclass
class Question:
    id: str
    persona: str
    task: str
    text: str


@dataclass
class QuestionSet:
    description: str
    n: int
    questions: list[Question] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_records(self) -> list[dict]:
        return [asdict(q) for q in self.questions]


_JSON_ARRAY = re.compile(r"\[.*\]", re.DOTALL)


def parse_string_list(text: str) -> list[str] | None:
    match = _JSON_ARRAY.search(text or "")
    if not match:
        return None
    try:
        data = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    if not isinstance(data, list):
        return None
    items = [x.strip() for x in data if isinstance(x, str) and x.strip()]
    return items or None


def generate_questions(
    description: str,
    n: int,
    gw: LLMGateway,
    prompts: PromptSet = DEFAULT_PROMPTS,
    seed: int = 0,
) -> QuestionSet:
    """n personas, n tasks per persona, n questions per (persona, task):
    1 + n + n^2 calls and n^3 questions when every reply parses."""
    if n < 1:
        raise InvalidConfig("n must be >= 1")
    result = QuestionSet(description, n)

    def ask(name: str, what: str, **values) -> list[str]:
        reply = gw.chat(ChatRequest.of(prompts.render(name, description=description, n=n, **values), seed=seed)).text
        items = parse_string_list(reply)
        if items is None:
            result.flags.append(f"unparsable {what}")
            return []
        if len(items) < n:
            result.flags.append(f"{what}: expected {n}, got {len(items)}")
        return items[:n]

    personas = ask("personas", "personas")
    tasks = gw.map(lambda p: [(p, t) for t in ask("tasks", f"tasks for {p!r}", persona=p)], personas)
    pairs = [pt for group in tasks for pt in group]
    questions = gw.map(
        lambda pt: [(pt[0], pt[1], q) for q in ask("questions", f"questions for {pt[1]!r}", persona=pt[0], task=pt[1])],
        pairs,
    )
    for i, (persona, task, text) in enumerate(q for group in questions for q in group):
        result.questions.append(Question(f"q{i:04d}", persona, task, text))
    return result


# -- judging ----------------------------------------------------------------

A, B, TIE = "A", "B", "tie"


@dataclass
class PairResult:
    question_id: str
    metric: str
    condition_a: str
    condition_b: str
    trials: list[str]
    failed_trials: int = 0

    @property
    def mean_score_a(self) -> float:
        return float(self.score_fraction)

    @property
    def score_fraction(self) -> Fraction:
        wins = sum(t == A for t in self.trials)
        ties = sum(t == TIE for t in self.trials)
        return Fraction(2 * wins + ties, 2 * len(self.trials))


def parse_verdict(text: str) -> str | None:
    match = re.search(r"\{.*\}", text or "", re.DOTALL)
    if not match:
        return None
    try:
        data = json.loads(match.group(0))
    except json.JSONDecodeError:
        return None
    winner = data.get("winner") if isinstance(data, dict) else None
    if not isinstance(winner, str):
        return None
    winner = winner.strip()
    if winner.upper() in (A, B):
        return winner.upper()
    if winner.lower() == TIE:
        return TIE
    return None


def judge_pair(
    question: str,
    answer_a: str,
    answer_b: str,
    metric: Metric,
    gw: LLMGateway,
    *,
    trials: int = 5,
    seed: int = 0,
    alternate: bool = True,
    question_id: str = "",
    condition_a: str = "a",
    condition_b: str = "b",
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> PairResult:
    """Judge ``answer_a`` against ``answer_b`` ``trials`` times.

    With ``alternate`` on, odd trials show B in the first slot and the
    verdict is mapped back, so slot position cannot favor one side. A trial
    whose call or reply fails counts as a tie.
    """
    if not answer_a.strip() or not answer_b.strip():
        raise ValueError("both answers must be non-empty")
    if trials < 1:
        raise InvalidConfig("trials must be >= 1")
    outcomes: list[str] = []
    failed = 0
    for t in range(trials):
        swapped = alternate and t % 2 == 1
        first, second = (answer_b, answer_a) if swapped else (answer_a, answer_b)
        prompt = prompts.render(
            "judge", question=question, metric=metric.name, rubric=metric.rubric, answer_a=first, answer_b=second
        )
        try:
            verdict = parse_verdict(gw.chat(ChatRequest.of(prompt, seed=seed + t)).text)
        except GatewayError as exc:
            log.warning("judge trial %d failed: %s", t, exc)
            verdict = None
        if verdict is None:
            failed += 1
            outcomes.append(TIE)
            continue
        if swapped and verdict != TIE:
            verdict = A if verdict == B else B
        outcomes.append(verdict)
    if failed == trials:
        raise JudgeFailed(f"all {trials} judge trials failed for {metric.name}")
    return PairResult(question_id, metric.name, condition_a, condition_b, outcomes, failed)


@dataclass
class WinRateMatrix:
    metric: str
    conditions: list[str]
    # cells[(x, y)] = win rate of x over y
    cells: dict[tuple[str, str], float]
    flags: dict[tuple[str, str], list[str]] = field(default_factory=dict)
    results: list[PairResult] = field(default_factory=list)

    def cell(self, x: str, y: str) -> float:
        return self.cells[(x, y)]

    def render(self) -> str:
        width = max(8, *(len(c) for c in self.conditions))
        head = f"{self.metric:<{width}}" + "".join(f"{c:>{width + 2}}" for c in self.conditions)
        rows = [head]
        for x in self.conditions:
            row = f"{x:<{width}}"
            for y in self.conditions:
                mark = "*" if self.flags.get((x, y)) else " "
                row += f"{self.cells[(x, y)] * 100:>{width + 1}.1f}{mark}"
            rows.append(row)
        return "\n".join(rows)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "conditions": self.conditions,
            "win_rates": {x: {y: self.cells[(x, y)] for y in self.conditions} for x in self.conditions},
            "flags": {f"{x}|{y}": v for (x, y), v in sorted(self.flags.items())},
            "trials": [asdict(r) for r in self.results],
        }


def run_tournament(
    questions: Sequence[Question],
    answers: Mapping[str, Mapping[str, str]],
    conditions: Sequence[str],
    metrics: Sequence[Metric],
    gw: LLMGateway,
    *,
    trials: int = 5,
    seed: int = 0,
    alternate: bool = True,
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> dict[str, WinRateMatrix]:
    """Judge every unordered pair of conditions on every question and metric.

    ``answers[condition][question_id]`` holds the answer text. The win rate
    of X over Y is the mean over questions of X's mean trial score; Y over X
    is its complement and the diagonal is 0.5.
    """
    conditions = list(conditions)
    if len(conditions) < 2 or len(set(conditions)) != len(conditions):
        raise InvalidConfig("need at least two distinct conditions")
    pairs = list(itertools.combinations(conditions, 2))
    # keyed by position: Question is mutable and therefore unhashable
    jobs = [(mi, x, y, qi) for mi in range(len(metrics)) for x, y in pairs for qi in range(len(questions))]

    def judge(job) -> PairResult | str:
        m, x, y, q = metrics[job[0]], job[1], job[2], questions[job[3]]
        try:
            return judge_pair(
                q.text, answers[x][q.id], answers[y][q.id], m, gw,
                trials=trials, seed=seed, alternate=alternate,
                question_id=q.id, condition_a=x, condition_b=y, prompts=prompts,
            )
        except (JudgeFailed, ValueError, KeyError) as exc:
            return f"{q.id}: {exc}"

    outcomes = dict(zip(jobs, gw.map(judge, jobs)))
    out: dict[str, WinRateMatrix] = {}
    for mi, m in enumerate(metrics):
        cells = {(c, c): 0.5 for c in conditions}
        flags: dict[tuple[str, str], list[str]] = {}
        results: list[PairResult] = []
        for x, y in pairs:
            scores: list[Fraction] = []
            notes: list[str] = []
            for qi, q in enumerate(questions):
                r = outcomes[(mi, x, y, qi)]
                if isinstance(r, str):
                    notes.append(r)
                    continue
                results.append(r)
                scores.append(r.score_fraction)
                if r.failed_trials:
                    notes.append(f"{q.id}: {r.failed_trials} failed trial(s)")
            rate = sum(scores, Fraction(0)) / len(scores) if scores else Fraction(1, 2)
            cells[(x, y)] = float(rate)
            # 1.0 - x is exact for x >= 0.5 and sums back to 1.0 otherwise
            cells[(y, x)] = 1.0 - cells[(x, y)]
            if notes:
                flags[(x, y)] = flags[(y, x)] = notes
        out[m.name] = WinRateMatrix(m.name, conditions, cells, flags, results)
    return out
