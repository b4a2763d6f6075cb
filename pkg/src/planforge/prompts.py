"""Prompt templates for every provider call the pipeline makes.

Bodies are frozen text with ``{PLACEHOLDER}`` slots; rendering is plain
substitution so the surrounding wording never drifts. The use-case template
hardcodes the canonical request count of 100 and the renderer splices in the
configured count only when it differs.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum


class PromptKind(str, Enum):
    USE_CASES = "use_cases"
    CODE_FOR_USE_CASE = "code_for_use_case"
    SUBGOAL_ANNOTATE = "subgoal_annotate"
    CHANGEABLE_AREAS = "changeable_areas"
    CLUSTER_NAME = "cluster_name"
    EXPLAIN_SELECTION = "explain_selection"
    PREDICT_OUTPUT = "predict_output"


USE_CASES_BODY = (
    "Give me 100 use cases of {DOMAIN_NAME}. A use case describes a task you can achieve "
    "with the given library. For example, for the math library in Python, calculating the "
    "area of a circle would be an appropriately specific use case, but doing calculations "
    "would be too general. List these use cases without any comments before or after. "
    "Basically, just give me a list of use cases and no other text. In addition, these use "
    "cases should be appropriate for instruction for novices."
)

CODE_FOR_USE_CASE_BODY = (
    "Write code to use {DOMAIN_NAME} to achieve the task I give to you. Return the code "
    "block without any text before or after. Basically, just give me the code block and no "
    "other text.\n\n"
    "Write code to do the following: {USE_CASE}."
)

SUBGOAL_ANNOTATE_BODY = (
    "For this piece of code, instead of putting a comment for every line, could you combine "
    "comments to add subgoals? Subgoals should describe small chunks of code that achieve a "
    "task that can be explained in natural language, rather than describing the code on a "
    "single line. Each subgoal should be put as a comment before the code starts.\n\n"
    "Here is the code: {FULL_PROGRAM}."
)

CHANGEABLE_AREAS_BODY = (
    "We define a domain-specific programming plan as a piece of code common in programs "
    "from a particular application area (e.g., web parsing) that achieves a specific goal. "
    "I am providing you with a piece of code. Based on this definition, can you highlight "
    "the changeable areas?  Changeable areas are the parts of the idiom that would change "
    "when it is used in different scenarios. Could you give me the exact block of code from "
    "the line that would change. Don't give me the whole line. Just give me the part of the "
    "line that would change. For example, if just the URL changes in a line, give me just "
    "the URL. Give me each of these in a code block. List these code blocks without any "
    "comments before or after. Basically, just give me a list of code blocks of code parts "
    "that would change and no other text.\n\n"
    "Here is the code: {CODE_SNIPPET}"
)

CLUSTER_NAME_BODY = (
    "I am giving you a cluster with comments which are the goals of some pieces of code "
    "along with the code. Come up with a name for this cluster of plans. Programming plans "
    "are pieces of code common in programs from a particular application area that are used "
    "to achieve a given goal. A name is reflective of what that plan achieves. So produce a "
    "name that would help me understand what goal the code  will be achieving. To reiterate, "
    "be very specific, and consider what each subgoal is doing. Do not consider the context. "
    "Just consider what the code is doing. Return the result to me in the form of the "
    'following string, "Name: ".\n\n'
    "Here is the cluster: {PROGRAMS_IN_CLUSTER}"
)

EXPLAIN_SELECTION_BODY = (
    "Here is a complete program:\n\n{FULL_PROGRAM}\n\n"
    "Give a short description of what the selected line(s) below do in the context of this "
    "program. Keep it to a few sentences and answer with the description only.\n\n"
    "Selected line(s):\n\n{SELECTION}"
)

PREDICT_OUTPUT_BODY = (
    "Walk through the following code step by step, reasoning carefully about what each "
    "statement does. After your reasoning, print a line containing exactly OUTPUT: and then "
    "the exact text the code would print to standard output, with nothing after it.\n\n"
    "Here is the code: {CODE_SNIPPET}"
)

TEMPLATE_BODIES: dict[PromptKind, str] = {
    PromptKind.USE_CASES: USE_CASES_BODY,
    PromptKind.CODE_FOR_USE_CASE: CODE_FOR_USE_CASE_BODY,
    PromptKind.SUBGOAL_ANNOTATE: SUBGOAL_ANNOTATE_BODY,
    PromptKind.CHANGEABLE_AREAS: CHANGEABLE_AREAS_BODY,
    PromptKind.CLUSTER_NAME: CLUSTER_NAME_BODY,
    PromptKind.EXPLAIN_SELECTION: EXPLAIN_SELECTION_BODY,
    PromptKind.PREDICT_OUTPUT: PREDICT_OUTPUT_BODY,
}

_PLACEHOLDER_RE = re.compile(r"\{([A-Z_]+)\}")


def placeholders(kind: PromptKind) -> list[str]:
    return _PLACEHOLDER_RE.findall(TEMPLATE_BODIES[kind])


@dataclass(frozen=True)
class PromptRequest:
    kind: PromptKind
    values: tuple[tuple[str, str], ...]  # substituted values, in placeholder order
    text: str

    def values_dict(self) -> dict[str, str]:
        return dict(self.values)

    def fixture_key(self) -> str:
        payload = json.dumps([self.kind.value, list(self.values)], ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:24]


def render(kind: PromptKind, values: dict[str, str], n_use_cases: int = 100) -> PromptRequest:
    """Substitute placeholders; for the use-case prompt also splice the count."""
    body = TEMPLATE_BODIES[kind]
    needed = placeholders(kind)
    missing = [p for p in needed if p not in values]
    if missing:
        raise KeyError(f"missing placeholder values for {kind.value}: {missing}")

    text = body
    ordered: list[tuple[str, str]] = []
    if kind is PromptKind.USE_CASES and n_use_cases != 100:
        text = text.replace("100", str(n_use_cases), 1)
    if kind is PromptKind.USE_CASES:
        ordered.append(("N_USE_CASES", str(n_use_cases)))
    for name in needed:
        text = text.replace("{" + name + "}", values[name])
        ordered.append((name, values[name]))
    return PromptRequest(kind=kind, values=tuple(ordered), text=text)
