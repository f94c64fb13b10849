"""Intent classification, session state, and the feedback-driven dialog policy.

Intents come from an editable pattern table (exact phrases and regexes, first
match in file order wins).  Utterances nothing matches fall through to the
question heuristics: interrogative markers make a question, otherwise three or
more content tokens do, otherwise the utterance is out of scope.

The policy is a small table: questions run the retrieval pipeline, negative
feedback walks down the current ranked list one document at a time, everything
else is a canned reply.
"""

from __future__ import annotations

import logging
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .analysis import content_tokens
from .index import RankedResult
from .reader import DocAnswer

logger = logging.getLogger(__name__)

QUESTION = "question"
POSITIVE_FEEDBACK = "positive_feedback"
NEGATIVE_FEEDBACK = "negative_feedback"
OUT_OF_SCOPE = "out_of_scope"

_WH_MARKERS = {"what", "which", "when", "where", "who", "whom", "whose", "why", "how"}


class DialogError(Exception):
    """Bad lexicon or template file."""


@dataclass(frozen=True)
class Intent:
    name: str
    confidence: float


@dataclass(frozen=True)
class Action:
    kind: str  # answer_question | next_ranked_answer | apologize_no_more | utter
    template_id: str | None = None


@dataclass
class DialogSession:
    """Per-conversation state; history is append-only."""

    session_id: str
    history: list[dict] = field(default_factory=list)
    current_question: str | None = None
    current_results: list[tuple[RankedResult, DocAnswer]] = field(default_factory=list)
    cursor: int = 0


@dataclass(frozen=True)
class TurnReply:
    text: str
    result: tuple[RankedResult, DocAnswer] | None = None


def _exact_key(text: str) -> str:
    """Case/whitespace/outer-punctuation-insensitive form for phrase matching."""
    return " ".join(text.lower().split()).strip(string.punctuation + " ")


class PatternLexicon:
    """Ordered (intent, matcher) table; earlier file entries take priority."""

    def __init__(self, entries: list[tuple[str, str, re.Pattern[str] | None]]) -> None:
        # Each entry: (intent name, exact key or raw pattern, compiled regex or None).
        self.entries = entries

    @classmethod
    def from_file(cls, path: str | Path) -> "PatternLexicon":
        entries: list[tuple[str, str, re.Pattern[str] | None]] = []
        intent: str | None = None
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                intent = stripped[1:-1].strip()
                if not intent:
                    raise DialogError(f"{path}:{lineno}: empty intent name")
                continue
            if intent is None:
                raise DialogError(f"{path}:{lineno}: pattern before any [intent] header")
            if stripped.startswith("re:"):
                pattern = stripped[3:].strip()
                try:
                    entries.append((intent, pattern, re.compile(pattern, re.IGNORECASE)))
                except re.error as exc:
                    raise DialogError(f"{path}:{lineno}: bad regex: {exc}") from exc
            else:
                entries.append((intent, _exact_key(stripped), None))
        return cls(entries)

    @classmethod
    def bundled(cls) -> "PatternLexicon":
        with resources.as_file(resources.files("opsqa").joinpath("data/intents.txt")) as path:
            return cls.from_file(path)

    def match(self, utterance: str) -> str | None:
        key = _exact_key(utterance)
        for intent, pattern, regex in self.entries:
            if regex is None:
                if key == pattern:
                    return intent
            elif regex.search(utterance.strip()):
                return intent
        return None

    def phrases(self, prefix: str) -> list[str]:
        """All exact phrases of intents starting with `prefix` (for tests/tools)."""
        return [p for intent, p, regex in self.entries if regex is None and intent.startswith(prefix)]

    def intent_names(self) -> list[str]:
        seen = dict.fromkeys(intent for intent, _, _ in self.entries)
        return list(seen)


def classify_intent(utterance: str, lexicon: PatternLexicon) -> Intent:
    """Pattern table first, then question heuristics, then out_of_scope."""
    matched = lexicon.match(utterance)
    if matched is not None:
        return Intent(matched, 1.0)
    lowered = utterance.lower()
    tokens = lowered.split()
    if utterance.strip().endswith("?") or any(t.strip(string.punctuation) in _WH_MARKERS for t in tokens):
        return Intent(QUESTION, 0.8)
    if len(content_tokens(utterance)) >= 3:
        return Intent(QUESTION, 0.6)
    return Intent(OUT_OF_SCOPE, 0.5)


def next_action(session: DialogSession, intent: Intent) -> Action:
    """The policy table mapping an intent to the next system action."""
    if intent.name == QUESTION:
        return Action("answer_question")
    if intent.name == NEGATIVE_FEEDBACK:
        if session.current_results and session.cursor + 1 < len(session.current_results):
            return Action("next_ranked_answer")
        return Action("apologize_no_more")
    if intent.name == OUT_OF_SCOPE:
        return Action("utter", "clarify")
    return Action("utter", intent.name)


class ReplyTemplates:
    """Keyed reply strings with str.format placeholders."""

    def __init__(self, templates: dict[str, str]) -> None:
        self.templates = templates

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplyTemplates":
        templates: dict[str, str] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise DialogError(f"{path}:{lineno}: expected '<key>\\t<text>'")
            templates[parts[0].strip()] = parts[1].strip()
        return cls(templates)

    @classmethod
    def bundled(cls) -> "ReplyTemplates":
        with resources.as_file(resources.files("opsqa").joinpath("data/replies.txt")) as path:
            return cls.from_file(path)

    def render(self, key: str, **kwargs) -> str:
        # Fall back per intent family (chitchat.x -> chitchat), then clarify.
        template = self.templates.get(key)
        if template is None and "." in key:
            template = self.templates.get(key.split(".", 1)[0])
        if template is None:
            template = self.templates.get("clarify", "Could you rephrase that?")
        return template.format(**kwargs)


def _answer_reply(
    pair: tuple[RankedResult, DocAnswer], templates: ReplyTemplates, doc_title: str
) -> TurnReply:
    result, answer = pair
    if answer.is_no_answer:
        text = templates.render("no_extractable_answer", doc_id=result.doc_id, title=doc_title)
    else:
        text = templates.render(
            "answer", doc_id=result.doc_id, title=doc_title, answer=answer.answer_text
        )
    return TurnReply(text=text, result=pair)


def execute(
    session: DialogSession,
    action: Action,
    pipeline,
    templates: ReplyTemplates,
    utterance: str,
) -> TurnReply:
    """Apply one action; on pipeline failure the session keeps its state."""
    if action.kind == "answer_question":
        try:
            results = pipeline.answer(utterance)
        except Exception as exc:  # noqa: BLE001 - any backend failure becomes a reply
            # Exceptions flagged `escalate` are transport-fatal and belong to
            # the caller (the HTTP layer turns them into a 502).
            if getattr(exc, "escalate", False):
                raise
            logger.warning("pipeline failure for %r: %s", utterance, exc)
            return TurnReply(text=templates.render("error"))
        session.current_question = utterance
        session.current_results = results
        session.cursor = 0
        if not results:
            return TurnReply(text=templates.render("no_match"))
        return _answer_reply(results[0], templates, pipeline.doc_title(results[0][0].doc_id))
    if action.kind == "next_ranked_answer":
        session.cursor += 1
        pair = session.current_results[session.cursor]
        return _answer_reply(pair, templates, pipeline.doc_title(pair[0].doc_id))
    if action.kind == "apologize_no_more":
        return TurnReply(text=templates.render("apologize_no_more"))
    return TurnReply(text=templates.render(action.template_id or "clarify"))


def take_turn(
    session: DialogSession,
    utterance: str,
    pipeline,
    lexicon: PatternLexicon,
    templates: ReplyTemplates,
) -> tuple[Intent, Action, TurnReply]:
    """One full dialog turn: classify, pick an action, execute, log history."""
    intent = classify_intent(utterance, lexicon)
    action = next_action(session, intent)
    reply = execute(session, action, pipeline, templates, utterance)
    session.history.append(
        {
            "utterance": utterance,
            "intent": intent.name,
            "action": action.kind,
            "reply": reply.text,
        }
    )
    return intent, action, reply
