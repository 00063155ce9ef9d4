"""Prompt templates shipped as package assets.

Each asset file under ``prompts/`` is one template; the template id is the
file stem. Placeholders use ``{name}`` syntax and rendering with a complete
binding must leave nothing unexpanded.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

_PLACEHOLDER = re.compile(r"(?<!\{)\{([a-z_][a-z0-9_]*)\}(?!\})")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body))

    def render(self, **binding: str) -> str:
        missing = self.placeholders - set(binding)
        if missing:
            raise KeyError(f"template {self.id}: unbound placeholders {sorted(missing)}")

        def replace(match: re.Match) -> str:
            return str(binding[match.group(1)])

        text = _PLACEHOLDER.sub(replace, self.body)
        return text.replace("{{", "{").replace("}}", "}")


def load_template(template_id: str) -> PromptTemplate:
    ref = resources.files("toolscribe").joinpath(f"prompts/{template_id}.txt")
    try:
        body = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(f"no prompt template named {template_id!r}") from None
    return PromptTemplate(id=template_id, body=body)


def available_templates() -> list[str]:
    folder = resources.files("toolscribe").joinpath("prompts")
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".txt"))
