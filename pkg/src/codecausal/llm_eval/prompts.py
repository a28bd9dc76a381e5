"""Prompt treatments and rendering.

Three treatments are built in: ``control`` (plain task prompt), ``T1``
(single instruction prompt) and ``T2`` (two prompts: a context prompt
carrying the docstring plus the cut code, then a processing prompt that
restates the function and asks for comment removal/optimization). Template
text is configurable; T2's context prompt wording is a reconstruction and
deliberately overridable.

Placeholders: ``{partial_code}`` (the cut method prefix), ``{code}``
(alias of the cut prefix in the processing prompt), ``{fun_name}`` and
``{docstring}``.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..testbeds import TestbedPoint

TREATMENT_IDS = ("control", "T1", "T2")


class PromptError(Exception):
    pass


@dataclass(frozen=True)
class TreatmentSpec:
    id: str
    steps: tuple[str, ...]

    def __post_init__(self):
        if self.id not in TREATMENT_IDS:
            raise PromptError(f"unknown treatment id {self.id!r}")
        expected = 2 if self.id == "T2" else 1
        if len(self.steps) != expected:
            raise PromptError(
                f"treatment {self.id} takes exactly {expected} step(s), "
                f"got {len(self.steps)}")


CONTROL_TEMPLATE = "Complete the following python method: ```{partial_code}```"

T1_TEMPLATE = ("Complete the following a Python code, return only code and "
               "complete method: ```{partial_code}```")

T2_CONTEXT_TEMPLATE = (
    "You are given the start of a Python function together with its "
    "description. Description: ```{docstring}``` The function so far: "
    "```{partial_code}```")

T2_PROCESSING_TEMPLATE = (
    "Remember you have a Python function named `{fun_name}`, the function "
    "starts with the following code `{code}`. The description for the "
    "function is: `{docstring}`. Return the complete method, removing "
    "comments and optimizing code.")


def default_treatments() -> dict[str, TreatmentSpec]:
    return {
        "control": TreatmentSpec("control", (CONTROL_TEMPLATE,)),
        "T1": TreatmentSpec("T1", (T1_TEMPLATE,)),
        "T2": TreatmentSpec("T2", (T2_CONTEXT_TEMPLATE,
                                   T2_PROCESSING_TEMPLATE)),
    }


def treatments_from_config(cfg: dict | None) -> dict[str, TreatmentSpec]:
    """Treatments with template overrides from config: a map of treatment
    id -> list of step templates."""
    specs = default_treatments()
    for tid, steps in (cfg or {}).items():
        specs[tid] = TreatmentSpec(tid, tuple(steps))
    return specs


class _Strict(dict):
    def __missing__(self, key):
        raise PromptError(f"unresolvable placeholder {{{key}}}")


def render_prompts(point: TestbedPoint, treatment: TreatmentSpec) -> list[str]:
    """Render every step of a treatment for one testbed point."""
    raw = point.point.raw
    partial = point.cut_prefix if point.cut_prefix is not None else raw.code
    values = {
        "partial_code": partial,
        "code": partial,
        "fun_name": raw.fun_name,
    }
    needs_doc = any("{docstring}" in step for step in treatment.steps)
    if needs_doc:
        if not raw.docstring:
            raise PromptError(
                f"treatment {treatment.id} requires a docstring but point "
                f"{raw.fun_name!r} has none")
        values["docstring"] = raw.docstring
    return [step.format_map(_Strict(values)) for step in treatment.steps]
