"""Natural-language corrections to reasoning chains, and the execution freeze.

A corrector turns operator feedback into edits against named chain
sections; everything not named stays byte-identical. Corrected chains are
held fixed for a few control steps before regeneration resumes, which
the schedule simulator models as a freeze window.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from . import chains
from .errors import InvalidEdit, ParseError
from .movement import parse_label

FREEZE_HORIZON = 5

_TEXT_SECTIONS = ("task", "subtask", "subtask_reason", "move", "move_reason")
_LIST_SECTIONS = ("plan", "objects")


@dataclass
class Correction:
    """Feedback plus the section edits derived from it."""

    feedback: str
    edits: list[tuple[str, str, object]] = field(default_factory=list)  # (section, op, payload)


def apply_correction(chain: chains.ReasoningChain, correction: Correction) -> chains.ReasoningChain:
    """Apply edits to a copy of the chain; the edited chain must re-validate."""
    new = dataclasses.replace(
        chain,
        plan=list(chain.plan),
        gripper=list(chain.gripper),
        objects=list(chain.objects),
    )
    try:
        for section, op, payload in correction.edits:
            _apply_edit(new, section, op, payload)
    except (ValueError, IndexError, TypeError) as exc:
        raise InvalidEdit(f"cannot apply edit: {exc}") from exc
    try:
        new.validate()
        reparsed = chains.parse(chains.serialize(new))
    except (ValueError, ParseError) as exc:
        raise InvalidEdit(f"corrected chain fails validation: {exc}") from exc
    if reparsed != new:
        raise InvalidEdit("corrected chain does not round-trip")
    return new


def _apply_edit(chain: chains.ReasoningChain, section: str, op: str, payload) -> None:
    if op == "replace":
        if section in _TEXT_SECTIONS:
            setattr(chain, section, str(payload))
        elif section == "plan":
            chain.plan = [str(p) for p in payload]
        elif section == "objects":
            chain.objects = list(payload)
        elif section == "gripper":
            chain.gripper = [(int(u), int(v)) for u, v in payload]
        else:
            raise ValueError(f"unknown section {section!r}")
    elif op == "insert":
        if section not in _LIST_SECTIONS:
            raise ValueError(f"insert only applies to {_LIST_SECTIONS}")
        index, item = payload
        getattr(chain, section).insert(int(index), item)
    elif op == "delete":
        if section not in _LIST_SECTIONS:
            raise ValueError(f"delete only applies to {_LIST_SECTIONS}")
        seq = getattr(chain, section)
        if section == "objects" and isinstance(payload, str):
            kept = [o for o in seq if o[0] != payload]
            if len(kept) == len(seq):
                raise ValueError(f"no object labeled {payload!r}")
            chain.objects = kept
        else:
            del seq[int(payload)]
    else:
        raise ValueError(f"unknown edit op {op!r}")


class RuleBasedCorrector:
    """Keyword corrector used in tests and offline tooling.

    Rules, in order: empty feedback means no edits; an explicit
    "section: payload" directive edits that section; feedback containing a
    canonical movement phrase (with a trailing "instead" tolerated)
    replaces MOVE; anything else replaces SUBTASK with the feedback text.
    """

    def propose(self, chain: chains.ReasoningChain, feedback: str) -> Correction:
        text = feedback.strip()
        if not text:
            return Correction(feedback=feedback, edits=[])

        head, sep, tail = text.partition(":")
        if sep and head.strip().lower() in (*_TEXT_SECTIONS, "plan"):
            section = head.strip().lower()
            payload = tail.strip()
            if section == "plan":
                items = [p.strip() for p in payload.split(";") if p.strip()]
                return Correction(feedback=feedback, edits=[("plan", "replace", items)])
            return Correction(feedback=feedback, edits=[(section, "replace", payload)])

        move = _extract_move_phrase(text)
        if move is not None:
            return Correction(feedback=feedback, edits=[("move", "replace", move)])

        return Correction(feedback=feedback, edits=[("subtask", "replace", _tidy(text))])


def _tidy(text: str) -> str:
    return " ".join(text.rstrip(".!?").split())


def _extract_move_phrase(text: str) -> str | None:
    candidate = _tidy(text).lower()
    for suffix in (" instead", " now", " please"):
        if candidate.endswith(suffix):
            candidate = candidate[: -len(suffix)]
    for prefix in ("no, ", "please ", "you should "):
        if candidate.startswith(prefix):
            candidate = candidate[len(prefix):]
    try:
        return parse_label(candidate).text
    except Exception:
        return None


class PromptCorrector:
    """Corrector backed by a language model behind a completion callable.

    The callable receives the filled intervention prompt and must return a
    full corrected chain string; the diff against the input chain becomes
    the edit list, so locality reporting matches the rule-based path.
    """

    def __init__(self, complete, prompt_template: str | None = None):
        self.complete = complete
        self.prompt_template = prompt_template or load_prompt("intervention")

    def propose(self, chain: chains.ReasoningChain, feedback: str) -> Correction:
        if not feedback.strip():
            return Correction(feedback=feedback, edits=[])
        prompt = self.prompt_template.format(
            chain=chains.serialize(chain), feedback=feedback.strip()
        )
        raw = self.complete(prompt)
        try:
            corrected = chains.parse(raw.strip())
        except ParseError as exc:
            raise InvalidEdit(f"corrector returned an unparsable chain: {exc}") from exc
        edits = []
        for key in ("task", "plan", "subtask", "subtask_reason", "move", "move_reason", "gripper", "objects"):
            if getattr(corrected, key) != getattr(chain, key):
                edits.append((key, "replace", getattr(corrected, key)))
        return Correction(feedback=feedback, edits=edits)


def correct(
    chain: chains.ReasoningChain,
    feedback: str,
    corrector=None,
) -> tuple[chains.ReasoningChain, int]:
    """Correct a chain from feedback; returns (chain', freeze horizon).

    The horizon tells the executor how many steps to hold the corrected
    chain fixed before regenerating.
    """
    corrector = corrector or RuleBasedCorrector()
    correction = corrector.propose(chain, feedback)
    if not correction.edits:
        return chain, FREEZE_HORIZON
    return apply_correction(chain, correction), FREEZE_HORIZON


@dataclass(frozen=True)
class ExecutorState:
    """What the serving loop holds between steps."""

    chain: chains.ReasoningChain
    freeze_remaining: int = 0


def apply_freeze(state: ExecutorState, corrected: chains.ReasoningChain, horizon: int = FREEZE_HORIZON) -> ExecutorState:
    """Install a corrected chain and (re)arm the freeze window.

    Overlapping freezes follow last-writer-wins: re-intervening replaces
    any remaining window with the new horizon.
    """
    if horizon < 1:
        raise ValueError(f"freeze horizon must be >= 1, got {horizon}")
    return ExecutorState(chain=corrected, freeze_remaining=horizon)


def tick(state: ExecutorState) -> ExecutorState:
    """Advance one control step, consuming the freeze window if armed."""
    if state.freeze_remaining > 0:
        return ExecutorState(chain=state.chain, freeze_remaining=state.freeze_remaining - 1)
    return state


def load_prompt(name: str) -> str:
    from importlib import resources

    return resources.files("ecotkit").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")
