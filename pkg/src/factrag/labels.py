"""The four veracity labels and tolerant label normalization."""

from __future__ import annotations

SUPPORTED = "Supported"
REFUTED = "Refuted"
NOT_ENOUGH_EVIDENCE = "Not Enough Evidence"
CONFLICTING = "Conflicting Evidence/Cherrypicking"

# Fixed order; ties and fallbacks resolve to the earliest entry.
LABELS = (SUPPORTED, REFUTED, NOT_ENOUGH_EVIDENCE, CONFLICTING)

ANSWER_TYPES = ("Boolean", "Extractive", "Abstractive", "Unanswerable")


def canonical_label(text: str | None) -> str | None:
    """Map a free-form verdict string onto one of the four labels.

    Matches by characteristic substrings ("sup", "ref", "conf"/"cherr",
    "not") so that variants like "Supported claim" or "refuted." still
    resolve. Returns None when nothing matches.
    """
    if not text:
        return None
    lowered = text.lower()
    if "sup" in lowered:
        return SUPPORTED
    if "ref" in lowered:
        return REFUTED
    if "conf" in lowered or "cherr" in lowered:
        return CONFLICTING
    if "not" in lowered:
        return NOT_ENOUGH_EVIDENCE
    return None


def canonical_answer_type(text: str | None) -> str:
    """Normalize an answer-type string; unknown values become Unanswerable."""
    if text:
        lowered = text.lower()
        if "unans" in lowered:
            return "Unanswerable"
        if "boo" in lowered:
            return "Boolean"
        if "ext" in lowered:
            return "Extractive"
        if "abs" in lowered:
            return "Abstractive"
    return "Unanswerable"
