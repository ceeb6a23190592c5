"""Prompt assembly: extraction prompts with a worked example and reasoning
guidelines, correction prompts for the validation loop, and the few-shot
classification prompt.

Section headings and the fixed format text are frozen: downstream extraction
quality is conditioned on these exact strings, so do not edit them casually.
Editable content (the worked example, the per-feature reasoning guidelines)
lives in external template files, one directory per schema::

    <templates>/<schema_name>/
        instructions.txt      (optional, defaults to DEFAULT_INSTRUCTIONS)
        example_report.txt
        example_reasoning.txt
        example_output.json
        guidelines.txt        (optional, empty means no extra guidance)

Template files may reference {{SCHEMA_BLOCK}}; the rendered prompt substitutes
the report into the {{REPORT}} slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .schema import ExtractionSchema, LabelSpec, emit_json_schema_block

DEFAULT_INSTRUCTIONS = (
    "The output JSON should be formatted as a JSON instance that conforms to the "
    "JSON schema from Pydantic.\n"
    "\n"
    'As an example, for the schema {"properties": {"foo": {"title": "Foo", '
    '"description": "a list of strings", "type": "array", "items": {"type": '
    '"string"}}}, "required": ["foo"]}}\n'
    'the object {"foo": ["bar", "baz"]} is a well-formatted instance of the schema. '
    'The object {"properties": {"foo": ["bar", "baz"]}} is not well-formatted.'
)

FORMAT_SECTION = (
    "When generating JSON instance follow this format:\n"
    "\n"
    "Medical report: the input medical report from which you should extract JSON instance.\n"
    "Reasoning: give me an explanation of how you assign value for a given key. "
    "Thinking step by step for each key before assigning a value to it.\n"
    "Output JSON: The final output JSON should be formatted as a JSON instance "
    "that conforms to the output JSON schema above."
)

SCHEMA_HEADING = "Here is the output JSON schema:"
EXAMPLE_HEADING = "Here is an example of a process:"
SEPARATOR = "-" * 80
REPORT_SLOT = "Medical report: {{REPORT}}"

DEFAULT_MAX_PROMPT_CHARS = 14000
TRUNCATION_MARKER = "\n[... truncated ...]\n"


class PromptError(ValueError):
    """Bad prompt inputs: missing template files, example/schema mismatch."""


@dataclass(frozen=True)
class OneShotExample:
    """Worked extraction example: a report, per-feature rationale, and its JSON."""

    report_text: str
    reasoning_text: str
    output_json_text: str

    def without_reasoning(self) -> "OneShotExample":
        return replace(self, reasoning_text="")


@dataclass(frozen=True)
class PromptBundle:
    """All pieces of an extraction prompt minus the report itself."""

    instructions: str
    schema_block: str
    format_section: str
    example: OneShotExample
    reasoning_guidelines: str
    report_slot: str = REPORT_SLOT

    def reasoning_block(self) -> str:
        """The removable reasoning section; empty when both sources are empty."""
        parts = [p for p in (self.reasoning_guidelines, self.example.reasoning_text) if p]
        if not parts:
            return ""
        return "Reasoning:\n" + "\n".join(parts) + "\n\n"

    def render(self, report: str) -> str:
        if not report:
            raise PromptError("report must be nonempty")
        body = (
            f"{self.instructions}\n"
            f"\n"
            f"{SCHEMA_HEADING}\n"
            f"```\n"
            f"{self.schema_block}\n"
            f"```\n"
            f"\n"
            f"{self.format_section}\n"
            f"\n"
            f"{EXAMPLE_HEADING}\n"
            f"\n"
            f"Medical report:\n"
            f"{self.example.report_text}\n"
            f"\n"
            f"{self.reasoning_block()}"
            f"Output JSON:\n"
            f"{self.example.output_json_text}\n"
            f"\n"
            f"{SEPARATOR}\n"
            f"\n"
            f"{self.report_slot}"
        )
        body = body.replace("{{SCHEMA_BLOCK}}", self.schema_block)
        return body.replace("{{REPORT}}", report)

    def without_reasoning(self) -> "PromptBundle":
        """Ablated bundle: drops guidelines and the example rationale, nothing else."""
        return replace(self, reasoning_guidelines="", example=self.example.without_reasoning())


def _check_example(example: OneShotExample, schema: ExtractionSchema) -> None:
    try:
        obj = json.loads(example.output_json_text)
    except json.JSONDecodeError as e:
        raise PromptError(f"example output is not valid JSON: {e}") from e
    from .vorc import validate_record  # local import, vorc depends on this module

    result = validate_record(obj, schema)
    if result.violations:
        details = "; ".join(v.message for v in result.violations)
        raise PromptError(f"example output does not validate against the schema: {details}")


def build_rextract_prompt(schema: ExtractionSchema, example: OneShotExample,
                          guidelines: str, report: str,
                          instructions: str = DEFAULT_INSTRUCTIONS) -> str:
    """Render the full extraction prompt for one report.

    Pass empty ``guidelines`` together with an example stripped of its
    reasoning (``example.without_reasoning()``) to get the extract-only
    ablation; every byte outside the reasoning block is unchanged.
    """
    _check_example(example, schema)
    bundle = PromptBundle(
        instructions=instructions,
        schema_block=emit_json_schema_block(schema),
        format_section=FORMAT_SECTION,
        example=example,
        reasoning_guidelines=guidelines,
    )
    return bundle.render(report)


def load_templates(template_dir: str | Path, schema: ExtractionSchema) -> PromptBundle:
    """Load a per-schema template directory into a renderable bundle."""
    template_dir = Path(template_dir)
    if not template_dir.is_dir():
        raise PromptError(f"template directory not found: {template_dir}")

    def read_required(name: str) -> str:
        p = template_dir / name
        if not p.is_file():
            raise PromptError(f"missing template file: {p}")
        return p.read_text(encoding="utf-8").strip("\n")

    def read_optional(name: str, default: str = "") -> str:
        p = template_dir / name
        return p.read_text(encoding="utf-8").strip("\n") if p.is_file() else default

    example = OneShotExample(
        report_text=read_required("example_report.txt"),
        reasoning_text=read_required("example_reasoning.txt"),
        output_json_text=read_required("example_output.json"),
    )
    _check_example(example, schema)
    return PromptBundle(
        instructions=read_optional("instructions.txt", DEFAULT_INSTRUCTIONS),
        schema_block=emit_json_schema_block(schema),
        format_section=FORMAT_SECTION,
        example=example,
        reasoning_guidelines=read_optional("guidelines.txt"),
    )


def truncate_middle(text: str, limit: int) -> str:
    """Cap ``text`` at ``limit`` characters, keeping head and tail around a marker.

    When truncation happens the result is exactly ``limit`` characters long
    (provided the limit leaves room for the marker plus one character per side).
    """
    if len(text) <= limit:
        return text
    budget = limit - len(TRUNCATION_MARKER)
    if budget < 2:
        return text[:max(limit, 0)]
    head = (budget + 1) // 2
    tail = budget - head
    return text[:head] + TRUNCATION_MARKER + text[-tail:]


def _fit_sections(front: str, middle: str, back: str, max_chars: int) -> tuple[str, str]:
    """Shrink middle (then front) so front+middle+back fits in max_chars."""
    fixed = len(front) + len(back)
    if fixed + len(middle) <= max_chars:
        return front, middle
    middle = truncate_middle(middle, max(max_chars - fixed, 0))
    if fixed + len(middle) > max_chars:
        front = truncate_middle(front, max(max_chars - len(back) - len(middle), 0))
    return front, middle


def build_json_correction_prompt(original_prompt: str, response: str, error: str,
                                 max_chars: int = DEFAULT_MAX_PROMPT_CHARS) -> str:
    """Ask the model to re-emit JSON after a parse failure, showing it the
    original prompt, its response, and the error."""
    if not (original_prompt and response and error):
        raise PromptError("original prompt, response and error must all be nonempty")
    front = (
        "Your previous answer could not be parsed as JSON.\n"
        "\n"
        "Original prompt:\n"
        f"{original_prompt}\n"
        "\n"
        "Response:\n"
    )
    back = (
        "\n"
        "\n"
        "Error:\n"
        f"{error}\n"
        "\n"
        "Extract the JSON data once more. Respond with only the corrected JSON "
        "instance and nothing else."
    )
    front, response = _fit_sections(front, response, back, max_chars)
    return front + response + back


def build_type_correction_prompt(original_prompt: str, response_json: str,
                                 violations: list,
                                 max_chars: int = DEFAULT_MAX_PROMPT_CHARS) -> str:
    """Ask the model to fix specific key values; one line per violation.

    ``violations`` holds ``(feature_name, detail)`` pairs or objects with
    ``key``/``message`` attributes (as produced by record validation); input
    order is preserved.
    """
    if not violations:
        raise PromptError("violations must be nonempty")
    lines = []
    for v in violations:
        if isinstance(v, tuple):
            key, detail = v
            lines.append(f"- {key}: {detail}")
        else:
            received = getattr(v, "received", None)
            if received is None:
                lines.append(f"- {v.key}: {v.message}")
            else:
                lines.append(f"- {v.key} (received {received!r}): {v.message}")
    front = (
        "Your previous answer contained values that do not conform to the expected "
        "key types.\n"
        "\n"
        "Original prompt:\n"
        f"{original_prompt}\n"
        "\n"
        "Response:\n"
    )
    back = (
        "\n"
        "\n"
        "Errors:\n"
        + "\n".join(lines)
        + "\n"
        "\n"
        "Make the necessary corrections. Respond with only the corrected JSON "
        "instance and nothing else."
    )
    front, response_json = _fit_sections(front, response_json, back, max_chars)
    return front + response_json + back


def build_fewshot_classifier_prompt(shots: list[tuple[str, str]], report: str,
                                    label_spec: LabelSpec, max_shots: int = 32) -> str:
    """K labeled report/answer pairs followed by the query and an empty answer slot."""
    if not 1 <= len(shots) <= max_shots:
        raise PromptError(f"need between 1 and {max_shots} shots, got {len(shots)}")
    valid = {label_spec.positive_value, label_spec.negative_value}
    parts = [
        f"Classify each medical report. Answer with exactly one of: "
        f"{label_spec.positive_value} or {label_spec.negative_value}.",
        "",
    ]
    for shot_report, shot_label in shots:
        if shot_label not in valid:
            raise PromptError(f"shot label {shot_label!r} is not one of {sorted(valid)}")
        parts.append(f"Medical report: {shot_report}")
        parts.append(f"Answer: {shot_label}")
        parts.append("")
    parts.append(f"Medical report: {report}")
    parts.append("Answer:")
    return "\n".join(parts)
