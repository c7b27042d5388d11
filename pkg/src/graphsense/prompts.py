"""Default prompt templates.

Templates use ``{name}`` placeholders. Only the names passed to :func:`render`
are substituted, so literal braces (JSON examples) survive untouched. A
workspace may override any template by dropping ``<name>.txt`` into its
``prompts/`` directory.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Mapping

EXTRACT_GRAPH = """-Goal-
Given a text document and a list of entity types, identify all entities of those types in the text and all relationships among the identified entities.

-Steps-
1. Identify all entities. For each entity, extract:
- entity_name: name of the entity, capitalized
- entity_type: one of the following types: [{entity_types}]
- entity_description: description of the entity's attributes and activities
Format each entity as ("entity"{tuple_delimiter}<entity_name>{tuple_delimiter}<entity_type>{tuple_delimiter}<entity_description>)

2. Among the entities from step 1, identify every pair (source_entity, target_entity) that is clearly related. For each pair, extract:
- source_entity: name of the source entity, as identified in step 1
- target_entity: name of the target entity, as identified in step 1
- relationship_description: why the source and target entities are related
Format each relationship as ("relationship"{tuple_delimiter}<source_entity>{tuple_delimiter}<target_entity>{tuple_delimiter}<relationship_description>)

3. Return all entities and relationships as a single list, using {record_delimiter} between records.

4. When finished, output {completion_delimiter}

-Examples-
{examples}

-Real Data-
Entity types: {entity_types}
Text: {input_text}
Output:"""

EXTRACT_CLAIMS = """-Goal-
Given a text document, extract every claim made about the entities of the listed types.

For each claim, extract:
- subject: name of the entity the claim is about, capitalized
- object: name of the entity affected by the claim, or NONE
- claim_type: a short category for the claim, capitalized
- claim_description: what is being claimed, with supporting evidence
- claim_date: start and end date of the claim in ISO-8601 (YYYY-MM-DD), or NONE
- claim_source_text: the exact quote from the text that supports the claim
Format each claim as ("claim"{tuple_delimiter}<subject>{tuple_delimiter}<object>{tuple_delimiter}<claim_type>{tuple_delimiter}<claim_description>{tuple_delimiter}<start_date>{tuple_delimiter}<end_date>{tuple_delimiter}<claim_source_text>)

Use {record_delimiter} between records and output {completion_delimiter} when finished.

-Real Data-
Entity types: {entity_types}
Text: {input_text}
Output:"""

GLEANING_CHECK = (
    "Check the extraction above against the text: were all entities extracted? "
    "Answer with a single word, YES or NO."
)

GLEANING_CONTINUE = (
    "MANY entities were missed in the last extraction. "
    "Add them below using the same format:"
)

SUMMARIZE_DESCRIPTIONS = """You are merging several descriptions of the same {element_kind} into one.
Resolve contradictions, keep every distinct fact, and write in the third person.
Keep the result under {max_tokens} tokens.

Element: {element_name}
Descriptions to merge:
{descriptions}

Merged description:"""

COMMUNITY_REPORT = """You are writing a community report about a group of related entities from a knowledge graph.
The report should tell a reader what the community is, who its key entities are, how they relate, and which themes dominate.
Keep the report under {max_tokens} tokens.

Respond with a JSON object of the form {"title": "<short name for the community>", "summary": "<report body>"}.

Community context:
{context}

JSON:"""

MAP_ANSWER = """---Role---
You are an analyst answering a question using only the data tables below.

---Goal---
Answer the question from the data. Then rate how helpful your answer is for the question with an integer helpfulness score from 0 to 100. Use 0 when the data contains nothing relevant.
Keep the answer under {max_tokens} tokens.

Respond with a JSON object: {"answer": "<your answer>", "score": <helpfulness score>}

---Question---
{question}

---Data---
{context}

JSON:"""

ANSWER = """---Role---
You are a helpful assistant answering questions about a dataset.

---Goal---
Write a thorough answer to the question, drawing only on the {reference_style} below. If they do not contain the answer, say so.
Keep the answer under {max_tokens} tokens.

---Question---
{question}

---{reference_style}---
{context}

Answer:"""

JUDGE = """You are judging two answers to the same question on a single criterion.

---Question---
{question}

---Criterion---
{metric}: {rubric}

---Answer A---
{answer_a}

---Answer B---
{answer_b}

Decide which answer is better according to the criterion, and explain why.
Declare a tie only when the answers are fundamentally similar and the differences negligible.
Respond with a JSON object: {"winner": "A" | "B" | "tie", "reasoning": "<why>"}

JSON:"""

PERSONAS = """Dataset description:
{description}

List {n} potential users of this dataset who would want to make sense of it as a whole.
Respond with a JSON array of {n} strings, each a one-sentence description of a user.

JSON:"""

TASKS = """Dataset description:
{description}

User: {persona}

List {n} tasks this user would perform with the dataset that require understanding the dataset as a whole.
Respond with a JSON array of {n} strings.

JSON:"""

QUESTIONS = """Dataset description:
{description}

User: {persona}
Task: {task}

Write {n} questions this user would ask to complete the task. Each question must require understanding of the entire corpus, not a single passage, and must not mention specific details of individual documents.
Respond with a JSON array of {n} strings.

JSON:"""

DEFAULTS: dict[str, str] = {
    "extract_graph": EXTRACT_GRAPH,
    "extract_claims": EXTRACT_CLAIMS,
    "gleaning_check": GLEANING_CHECK,
    "gleaning_continue": GLEANING_CONTINUE,
    "summarize_descriptions": SUMMARIZE_DESCRIPTIONS,
    "community_report": COMMUNITY_REPORT,
    "map_answer": MAP_ANSWER,
    "answer": ANSWER,
    "judge": JUDGE,
    "personas": PERSONAS,
    "tasks": TASKS,
    "questions": QUESTIONS,
}

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def render(template: str, **values: object) -> str:
    """Fill ``{name}`` placeholders that appear in ``values``; leave others as-is."""

    def sub(match: re.Match) -> str:
        key = match.group(1)
        return str(values[key]) if key in values else match.group(0)

    return _PLACEHOLDER.sub(sub, template)


class PromptSet:
    """Default templates, optionally overridden from a directory of ``.txt`` files."""

    def __init__(self, overrides: Mapping[str, str] | None = None):
        self._templates = dict(DEFAULTS)
        self._templates.update(overrides or {})

    @classmethod
    def from_dir(cls, path: Path | str | None) -> "PromptSet":
        overrides: dict[str, str] = {}
        if path is not None and Path(path).is_dir():
            for f in sorted(Path(path).glob("*.txt")):
                if f.stem in DEFAULTS:
                    overrides[f.stem] = f.read_text(encoding="utf-8")
        return cls(overrides)

    def __getitem__(self, name: str) -> str:
        return self._templates[name]

    def render(self, name: str, **values: object) -> str:
        return render(self._templates[name], **values)


DEFAULT_PROMPTS = PromptSet()
