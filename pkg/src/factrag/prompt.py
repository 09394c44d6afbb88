"""System/user prompt construction for the evidence-and-verdict call.

The system prompt is a fixed template: task instructions, the numbered
source blocks, the mandatory JSON output schema, and the few-shot section.
The fixed parts are byte-stable across claims; only the sources and
few-shot examples vary. The user message is the bare claim text.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fewshot import TrainExample
from .retrieve import RetrievedSource

INSTRUCTIONS = (
    "You are a professional fact checker, formulate up to 10 questions that cover all the "
    "facts needed to validate whether the factual statement (in User message) is true, false, "
    "uncertain or a matter of opinion. Each question has one of four answer types: Boolean, "
    "Extractive, Abstractive and Unanswerable using the provided sources.\n"
    "After formulating Your questions and their answers using the provided sources, You "
    "evaluate the possible veracity verdicts (Supported claim, Refuted claim, Not enough "
    "evidence, or Conflicting evidence/Cherrypicking) given your claim and evidence on a "
    "Likert scale (1 - Strongly disagree, 2 - Disagree, 3 - Neutral, 4 - Agree, 5 - Strongly "
    "agree). Ultimately, you note the single likeliest veracity verdict according to your "
    "best knowledge.\n"
    "The facts must be coming from these sources, please refer them using assigned IDs:"
)

OUTPUT_FORMAT_SECTION = """## Output formatting
Please, you MUST only print the output in the following output format:
```json
{
 "questions":
     [
         {"question": "<Your first question>", "answer": "<The answer to the Your first question>", "source": "<Single numeric source ID backing the answer for Your first question>", "answer_type":"<The type of first answer>"},
         {"question": "<Your second question>", "answer": "<The answer to the Your second question>", "source": "<Single numeric Source ID backing the answer for Your second question>", "answer_type":"<The type of second answer>"}
     ],
 "claim_veracity": {
     "Supported": "<Likert-scale rating of how much You agree with the 'Supported' veracity classification>",
     "Refuted": "<Likert-scale rating of how much You agree with the 'Refuted' veracity classification>",
     "Not Enough Evidence": "<Likert-scale rating of how much You agree with the 'Not Enough Evidence' veracity classification>",
     "Conflicting Evidence/Cherrypicking": "<Likert-scale rating of how much You agree with the 'Conflicting Evidence/Cherrypicking' veracity classification>"
 },
 "veracity_verdict": "<The suggested veracity classification for the claim>"
}
```"""

FEWSHOT_SECTION_HEADER = (
    "## Few-shot learning\n"
    "You have access to the following few-shot learning examples for questions and answers.:\n"
)


@dataclass
class PromptBundle:
    system: str
    user: str
    char_count: int
    source_ids: list[int]


def _render_source(source: RetrievedSource) -> str:
    chunk = source.chunk
    parts = [p for p in (chunk.context_before, chunk.text, chunk.context_after) if p]
    return f"\n---\n## Source ID: {source.source_id} [{chunk.url}]\n" + "\n".join(parts)


def _render_example(example: TrainExample) -> str:
    lines = [f'\n### Question examples for claim "{example.claim}" (verdict {example.gold_label})']
    lines.extend(
        f'"question": "{question}", "answer": "{answer}", "answer_type": "{answer_type}"'
        for question, answer, answer_type in example.qa_pairs
    )
    return "\n".join(lines) + "\n"


def build_system_prompt(sources: list[RetrievedSource], examples: list[TrainExample]) -> str:
    """Render the full system prompt; sources are numbered in their given order."""
    if not sources:
        raise ValueError("at least one source is required")
    parts = [INSTRUCTIONS]
    parts.extend(_render_source(source) for source in sources)
    parts.append("\n---\n" + OUTPUT_FORMAT_SECTION)
    parts.append("\n---\n" + FEWSHOT_SECTION_HEADER)
    parts.extend(_render_example(example) for example in examples)
    return "".join(parts)


def build_user_message(
    claim_text: str,
    speaker: str | None = None,
    claim_date: str | None = None,
    include_metadata: bool = False,
) -> str:
    """The user message: the claim text, optionally with speaker/date lines."""
    if not claim_text:
        raise ValueError("claim text is empty")
    if not include_metadata:
        return claim_text
    lines = [f"Claim: {claim_text}"]
    if speaker:
        lines.append(f"Speaker: {speaker}")
    if claim_date:
        lines.append(f"Date: {claim_date}")
    return "\n".join(lines)


def build_prompt_bundle(
    sources: list[RetrievedSource],
    examples: list[TrainExample],
    claim_text: str,
    speaker: str | None = None,
    claim_date: str | None = None,
    include_metadata: bool = False,
) -> PromptBundle:
    system = build_system_prompt(sources, examples)
    user = build_user_message(claim_text, speaker, claim_date, include_metadata)
    return PromptBundle(
        system=system,
        user=user,
        char_count=len(system) + len(user),
        source_ids=[source.source_id for source in sources],
    )
