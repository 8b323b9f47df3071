"""Loop configuration and prompt-template assets.

Templates ship as editable text files; each follows the same three-part
structure (role, task restatement, output-format stanza) and is validated for
its required placeholders at configuration time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

MODES = ("coordinate", "som")

TEMPLATE_NAMES = (
    "contact_initial_coordinate",
    "contact_refine_coordinate",
    "contact_diagnose_coordinate",
    "contact_best_coordinate",
    "contact_initial_som",
    "contact_refine_som",
    "contact_diagnose_som",
    "contact_best_som",
    "direction_initial",
    "direction_refine",
    "direction_diagnose",
    "direction_best",
)

_FEEDBACK_FIELDS = ("{suggested_part}", "{appearance_and_position}",
                    "{relative_position}")

REQUIRED_PLACEHOLDERS = {
    "contact_initial_coordinate": ("{instruction}",),
    "contact_refine_coordinate": ("{instruction}", "{previous}") + _FEEDBACK_FIELDS,
    "contact_diagnose_coordinate": ("{instruction}",),
    "contact_best_coordinate": ("{instruction}", "{proposal_count}"),
    "contact_initial_som": ("{instruction}", "{candidate_count}"),
    "contact_refine_som": ("{instruction}", "{candidate_count}",
                           "{previous}") + _FEEDBACK_FIELDS,
    "contact_diagnose_som": ("{instruction}", "{proposal}"),
    "contact_best_som": ("{instruction}", "{proposal_count}", "{proposals}"),
    "direction_initial": ("{instruction}",),
    "direction_refine": ("{instruction}", "{previous}") + _FEEDBACK_FIELDS,
    "direction_diagnose": ("{instruction}", "{proposal}"),
    "direction_best": ("{instruction}", "{proposal_count}", "{proposals}"),
}


def load_default_templates() -> dict[str, str]:
    base = resources.files(__package__) / "templates"
    return {name: (base / f"{name}.txt").read_text(encoding="utf-8")
            for name in TEMPLATE_NAMES}


def load_templates_from_dir(directory) -> dict[str, str]:
    """Default templates with any same-named .txt file in ``directory`` overriding."""
    templates = load_default_templates()
    directory = Path(directory)
    for name in TEMPLATE_NAMES:
        override = directory / f"{name}.txt"
        if override.exists():
            templates[name] = override.read_text(encoding="utf-8")
    return templates


def validate_templates(templates: dict[str, str]) -> None:
    for name in TEMPLATE_NAMES:
        if name not in templates:
            raise ValueError(f"missing prompt template {name!r}")
        for placeholder in REQUIRED_PLACEHOLDERS[name]:
            if placeholder not in templates[name]:
                raise ValueError(
                    f"template {name!r} lacks required placeholder {placeholder}")


@dataclass
class LoopConfig:
    """Settings for one Actor/Verifier run.

    ``max_iterations`` caps the number of refinement steps, so a stage issues
    at most T+1 proposals. ``som_candidates`` is the partition size K used in
    som mode.
    """

    max_iterations: int = 3
    mode: str = "coordinate"
    som_candidates: int = 12
    templates: dict[str, str] = field(default_factory=load_default_templates)
    backend_url: str | None = None
    model: str | None = None

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.som_candidates < 1:
            raise ValueError("som_candidates must be >= 1")
        validate_templates(self.templates)

    def template(self, name: str) -> str:
        return self.templates[name]
