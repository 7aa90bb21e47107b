"""Scenario files: a flat ``key = value`` format with ``branch`` blocks.

Example::

    name = parabola
    domain = -1 1 -1 2
    seed = 0 0
    step = 0.002
    branch
    term = 0 1 1
    term = 2 0 -1
    branch
    term = 0 0 0

``#`` starts a comment.  Every ``term = i j c`` line belongs to the most
recent ``branch`` line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .core import Branch, Domain, SemiconcaveFn, make_fn


class ScenarioError(ValueError):
    pass


OPTION_DEFAULTS = {
    "step": 2e-3,
    "max_len": 10.0,
    "tol_active": 1e-9,
    "delta_min": 1e-6,
    "turn_tol": 1e-3,
    "grid_h": None,
}


@dataclass
class Scenario:
    name: str
    branches: list[list[tuple[int, int, float]]]
    domain: Domain
    seeds: list[tuple[float, float]] = field(default_factory=list)
    options: dict = field(default_factory=dict)

    def option(self, key):
        value = self.options.get(key, OPTION_DEFAULTS[key])
        if key == "grid_h" and value is None:
            value = min(self.domain.width, self.domain.height) / 64
        return value

    def function(self) -> SemiconcaveFn:
        try:
            return make_fn([Branch(b) for b in self.branches], self.domain)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc


def _floats(value: str, n: int, lineno: int, key: str) -> list[float]:
    parts = value.split()
    if len(parts) != n:
        raise ScenarioError(f"line {lineno}: '{key}' expects {n} numbers, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ScenarioError(f"line {lineno}: non-numeric value in '{key}'") from None


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    name = default_name
    domain = None
    branches: list[list[tuple[int, int, float]]] = []
    seeds = []
    options = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = (part.strip() for part in line.partition("="))
        if key == "branch":
            branches.append([])
        elif key == "term":
            if not branches:
                raise ScenarioError(f"line {lineno}: 'term' before any 'branch'")
            parts = value.split()
            if len(parts) != 3:
                raise ScenarioError(f"line {lineno}: 'term' expects 'i j c'")
            try:
                i, j, c = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ScenarioError(f"line {lineno}: malformed term '{value}'") from None
            branches[-1].append((i, j, c))
        elif key == "name":
            if not value or any(ch in value for ch in "/\\ "):
                raise ScenarioError(f"line {lineno}: invalid name '{value}'")
            name = value
        elif key == "domain":
            try:
                domain = Domain(*_floats(value, 4, lineno, key))
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: {exc}") from None
        elif key == "seed":
            seeds.append(tuple(_floats(value, 2, lineno, key)))
        elif key in OPTION_DEFAULTS:
            (v,) = _floats(value, 1, lineno, key)
            if not v > 0:
                raise ScenarioError(f"line {lineno}: option '{key}' must be positive")
            options[key] = v
        else:
            raise ScenarioError(f"line {lineno}: unknown key '{key}'")
    if domain is None:
        raise ScenarioError("missing 'domain'")
    if not branches:
        raise ScenarioError("no branches")
    for k, b in enumerate(branches):
        if not b:
            raise ScenarioError(f"branch {k} has no terms")
    scenario = Scenario(name, branches, domain, seeds, options)
    scenario.function()  # validate eagerly
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(text, default_name=path.stem)
