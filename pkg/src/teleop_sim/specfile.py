"""Experiment spec files: flat ``key = value`` text with dotted keys.

::

    experiment.seed = 20240501
    experiment.repetitions = 3
    experiment.experts = 5
    base.duration_s = 20
    base.trajectory.kind = pseudo-expert
    condition.wired.transport = wired
    condition.wireless.transport = wireless

``experiment.*`` keys describe the batch; ``base.*`` keys are scenario keys
shared by every condition; ``condition.<name>.*`` keys override the base for
one named condition. Conditions keep the order in which they first appear.
Full key list: see README.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .config import ScenarioConfig, scenario_from_flat
from .core import derive_seed
from .errors import ConfigError

_EXPERIMENT_KEYS = {"name", "seed", "repetitions", "experts", "output"}
_NAME = re.compile(r"^[A-Za-z0-9_-]+$")


class SpecError(ConfigError):
    pass


@dataclass
class ExperimentSpec:
    name: str
    seed: int
    repetitions: int
    experts: int
    conditions: list = field(default_factory=list)  # [(name, {key: value})]
    base: dict = field(default_factory=dict)
    output: str | None = None
    entries: list = field(default_factory=list)  # [(key, value)] as written
    where: dict = field(default_factory=dict)  # key -> "line N"

    @property
    def condition_names(self) -> list[str]:
        return [c for c, _ in self.conditions]

    def scenario(self, condition: str) -> ScenarioConfig:
        delta = dict(self.conditions)[condition]
        flat = {**self.base, **delta}
        where = {}
        for key in self.base:
            where[key] = self.where.get(f"base.{key}", "")
        for key in delta:
            where[key] = self.where.get(f"condition.{condition}.{key}", "")
        try:
            return scenario_from_flat(flat, {k: v for k, v in where.items() if v})
        except ConfigError as exc:
            raise SpecError(f"condition {condition!r}: {exc}") from exc

    def runs(self):
        """Yield (condition, expert, config) with the per-expert seed applied.

        Repetition seeds are derived from these by the batch runner, so the
        same (expert, repetition) block shares its seed across conditions.
        """
        for cond in self.condition_names:
            cfg = self.scenario(cond)
            for e in range(self.experts):
                yield cond, e, cfg.with_seed(derive_seed(self.seed, e))


def _strip_comment(line: str) -> str:
    # '#' starts a comment at line start or after whitespace
    m = re.search(r"(^|\s)#", line)
    return line[: m.start()] if m else line


def parse_spec(text: str, source: str = "<spec>") -> ExperimentSpec:
    values: dict[str, str] = {}
    where: dict[str, str] = {}
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not re.fullmatch(r"[A-Za-z0-9_.-]+", key):
            raise SpecError(f"{source}:{lineno}: invalid key {key!r}")
        if key in values:
            raise SpecError(f"{source}:{lineno}: duplicate key {key!r} (first set on {where[key]})")
        values[key] = value
        where[key] = f"line {lineno}"
        entries.append((key, value))

    def loc(key):
        return f"{source}:{where[key][5:]}" if key in where else source

    exp = {}
    base = {}
    conditions: dict[str, dict] = {}
    for key, value in entries:
        head, _, rest = key.partition(".")
        if head == "experiment":
            if rest not in _EXPERIMENT_KEYS:
                raise SpecError(f"{loc(key)}: unknown experiment field {rest!r}")
            exp[rest] = value
        elif head == "base":
            if not rest:
                raise SpecError(f"{loc(key)}: empty base key")
            if rest == "seed":
                raise SpecError(f"{loc(key)}: per-scenario seeds come from experiment.seed")
            base[rest] = value
        elif head == "condition":
            name, _, sub = rest.partition(".")
            if not _NAME.match(name or "") or not sub:
                raise SpecError(f"{loc(key)}: expected condition.<name>.<field>")
            if sub == "seed":
                raise SpecError(f"{loc(key)}: per-scenario seeds come from experiment.seed")
            conditions.setdefault(name, {})[sub] = value
        else:
            raise SpecError(f"{loc(key)}: keys must start with experiment., base. or condition.")

    def int_field(name, default):
        if name not in exp:
            return default
        try:
            v = float(exp[name])
        except ValueError:
            raise SpecError(f"{loc('experiment.' + name)}: experiment.{name} must be an integer") from None
        if v != int(v):
            raise SpecError(f"{loc('experiment.' + name)}: experiment.{name} must be an integer")
        return int(v)

    if "seed" not in exp:
        raise SpecError(f"{source}: missing experiment.seed")
    seed = int_field("seed", 0)
    reps = int_field("repetitions", 1)
    experts = int_field("experts", 1)
    if reps < 1:
        raise SpecError(f"{loc('experiment.repetitions')}: repetitions must be >= 1")
    if experts < 1:
        raise SpecError(f"{loc('experiment.experts')}: experts must be >= 1")
    if not conditions:
        raise SpecError(f"{source}: no conditions defined (condition.<name>.transport = ...)")

    spec = ExperimentSpec(
        name=exp.get("name", Path(source).stem), seed=seed, repetitions=reps, experts=experts,
        conditions=list(conditions.items()), base=base, output=exp.get("output"),
        entries=entries, where=where,
    )
    for cond in spec.condition_names:
        spec.scenario(cond)  # validate eagerly
    return spec


def load_spec(path) -> ExperimentSpec:
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.name in bundled_specs():
        return parse_spec(bundled_spec_text(p.name), f"{p.name}.spec")
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path}: {exc.strerror}") from exc
    return parse_spec(text, str(path))


def bundled_specs() -> list[str]:
    files = resources.files("teleop_sim").joinpath("data")
    return sorted(f.name[:-5] for f in files.iterdir() if f.name.endswith(".spec"))


def bundled_spec_text(name: str) -> str:
    return resources.files("teleop_sim").joinpath("data", f"{name}.spec").read_text(encoding="utf-8")
