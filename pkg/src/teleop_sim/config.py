"""Scenario configuration and its flat ``key = value`` representation.

The flat form is what spec files contain and what run manifests echo back.
Keys use dotted paths (``gains.P``, ``transport.spike_prob``,
``contact.0.torque``); vector values are comma-separated lists or a single
scalar broadcast to all seven joints.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .core import DOF, US_PER_S, JointVector, SimTime, as_dof_array
from .dynamics import (
    DEFAULT_TRAJECTORY, ArmModel, ArmState, ControlGains, OperatorTrajectory, Waypoint,
)
from .errors import ArityError, ConfigError, ConstructionError, GainError, SamplerError
from .transport import KINDS, DelaySampler

PSEUDO_EXPERT = "pseudo-expert"

# transport override keys and how to parse them
_SAMPLER_KEYS = ("send_overhead", "receive_path", "spike_delay", "overrun_delay")
_FLOAT_KEYS = ("spike_prob", "overrun_prob")
_INT_KEYS = ("cycle_us", "cycle_phase_us")


@dataclass(frozen=True)
class ContactEvent:
    """Scripted environment torque on the follower over ``[start_us, end_us)``."""

    start_us: SimTime
    end_us: SimTime
    torque: JointVector

    def __post_init__(self):
        if not 0 <= self.start_us < self.end_us:
            raise ConfigError(f"contact window must satisfy 0 <= start < end, got [{self.start_us}, {self.end_us})")
        if not isinstance(self.torque, JointVector):
            object.__setattr__(self, "torque", JointVector(self.torque))


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    transport: str = "wired"
    transport_overrides: dict = field(default_factory=dict)
    gains: ControlGains = field(default_factory=ControlGains)
    leader_model: ArmModel = field(default_factory=ArmModel)
    follower_model: ArmModel = field(default_factory=ArmModel)
    trajectory: OperatorTrajectory | str = DEFAULT_TRAJECTORY
    contacts: tuple = ()
    duration_us: SimTime = 30 * US_PER_S
    control_period_us: int = 1000
    comm_period_us: int = 50_000
    leader_comm_phase_us: int = 0
    follower_comm_phase_us: int = 0
    initial_leader: ArmState | None = None
    initial_follower: ArmState | None = None
    seed: int = 0

    def __post_init__(self):
        if self.transport not in KINDS:
            raise ConfigError(f"unknown transport kind {self.transport!r}; expected one of {', '.join(KINDS)}")
        for key in self.transport_overrides:
            if key not in _SAMPLER_KEYS + _FLOAT_KEYS + _INT_KEYS:
                raise ConfigError(f"unknown transport override {key!r}")
        if self.control_period_us <= 0 or self.comm_period_us <= 0:
            raise ConfigError("control and comm periods must be positive")
        if self.comm_period_us % self.control_period_us:
            raise ConfigError(
                f"comm period {self.comm_period_us} us is not a multiple of control period {self.control_period_us} us"
            )
        if self.duration_us < US_PER_S:
            raise ConfigError(f"duration must be at least 1 s, got {self.duration_us} us")
        if self.duration_us % self.control_period_us:
            raise ConfigError("duration must be a whole number of control periods")
        if self.leader_comm_phase_us < 0 or self.follower_comm_phase_us < 0:
            raise ConfigError("comm phase offsets must be nonnegative")
        if isinstance(self.trajectory, str) and self.trajectory != PSEUDO_EXPERT:
            raise ConfigError(f"trajectory must be an OperatorTrajectory or {PSEUDO_EXPERT!r}")
        object.__setattr__(self, "contacts", tuple(self.contacts))
        object.__setattr__(self, "transport_overrides", dict(self.transport_overrides))

    @property
    def n_ticks(self) -> int:
        return self.duration_us // self.control_period_us + 1

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return dataclasses.replace(self, seed=int(seed))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_flat(self) -> dict[str, str]:
        return scenario_to_flat(self)


# ---------------------------------------------------------------- formatting

def fmt_float(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def fmt_vector(v) -> str:
    arr = np.asarray(v, dtype=float).ravel()
    if np.all(arr == arr[0]):
        return fmt_float(arr[0])
    return ", ".join(fmt_float(x) for x in arr)


def scenario_to_flat(cfg: ScenarioConfig) -> dict[str, str]:
    out: dict[str, str] = {"transport": cfg.transport}
    for key in sorted(cfg.transport_overrides):
        val = cfg.transport_overrides[key]
        out[f"transport.{key}"] = val.describe() if isinstance(val, DelaySampler) else fmt_float(val)
    out["gains.P"] = fmt_vector(cfg.gains.P)
    out["gains.D"] = fmt_vector(cfg.gains.D)
    out["gains.K"] = fmt_float(cfg.gains.K)
    for side, model in (("leader", cfg.leader_model), ("follower", cfg.follower_model)):
        out[f"{side}.inertia"] = fmt_vector(model.inertia)
        out[f"{side}.damping"] = fmt_vector(model.damping)
    out.update(trajectory_to_flat(cfg.trajectory))
    for i, c in enumerate(cfg.contacts):
        out[f"contact.{i}.start_s"] = fmt_float(c.start_us / US_PER_S)
        out[f"contact.{i}.end_s"] = fmt_float(c.end_us / US_PER_S)
        out[f"contact.{i}.torque"] = fmt_vector(c.torque.values)
    out["duration_s"] = fmt_float(cfg.duration_us / US_PER_S)
    out["control_period_us"] = str(cfg.control_period_us)
    out["comm_period_us"] = str(cfg.comm_period_us)
    out["leader_comm_phase_us"] = str(cfg.leader_comm_phase_us)
    out["follower_comm_phase_us"] = str(cfg.follower_comm_phase_us)
    for side, st in (("leader", cfg.initial_leader), ("follower", cfg.initial_follower)):
        if st is not None:
            out[f"initial.{side}_q"] = fmt_vector(st.q.values)
            out[f"initial.{side}_qd"] = fmt_vector(st.qdot.values)
    out["seed"] = str(cfg.seed)
    return out


def trajectory_to_flat(traj, prefix: str = "trajectory") -> dict[str, str]:
    if isinstance(traj, str):
        return {f"{prefix}.kind": traj}
    out = {f"{prefix}.kind": traj.kind}
    if traj.kind == "sinusoidal":
        out[f"{prefix}.amplitude"] = fmt_vector(traj.amplitude)
        out[f"{prefix}.frequency_hz"] = fmt_vector(traj.frequency)
        out[f"{prefix}.phase"] = fmt_vector(traj.phase)
    else:
        for i, wp in enumerate(traj.waypoints):
            out[f"{prefix}.waypoint.{i}.q"] = fmt_vector(wp.q.values)
            out[f"{prefix}.waypoint.{i}.move_s"] = fmt_float(wp.move_s)
            out[f"{prefix}.waypoint.{i}.hold_s"] = fmt_float(wp.hold_s)
    return out


# ------------------------------------------------------------------- parsing

def parse_vector(text: str, name: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse numbers from {text!r}") from exc
    if not all(math.isfinite(x) for x in parts):
        raise ConfigError(f"{name}: values must be finite, got {text!r}")
    if len(parts) == 1:
        return np.full(DOF, parts[0])
    if len(parts) != DOF:
        raise ArityError(f"{name}: expected 1 or {DOF} values, got {len(parts)}")
    return as_dof_array(parts, name)


def parse_float(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigError(f"{name}: expected a number, got {text!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(f"{name}: value must be finite")
    return value


def parse_int(text: str, name: str) -> int:
    value = parse_float(text, name)
    if value != int(value):
        raise ConfigError(f"{name}: expected an integer, got {text!r}")
    return int(value)


_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_-]*)|([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(.))")


def parse_sampler(text: str) -> DelaySampler:
    """Parse ``constant(500)``, ``gamma(shift=50, shape=0.27, scale=244)``,
    ``moments(shift=50, mean=116, sigma=127)`` or ``mixture(<base>, p, <spike>)``."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        pos = m.end()
        if m.group(1):
            tokens.append(("name", m.group(1)))
        elif m.group(2):
            tokens.append(("num", float(m.group(2))))
        elif m.group(3) and not m.group(3).isspace():
            tokens.append(("sym", m.group(3)))
    parser = _SamplerParser(tokens, text)
    sampler = parser.sampler()
    if parser.i != len(tokens):
        raise SamplerError(f"trailing input in sampler spec {text!r}")
    return sampler


class _SamplerParser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def _take(self, kind, value=None):
        tok = self._peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise SamplerError(f"malformed sampler spec {self.text!r}")
        self.i += 1
        return tok[1]

    def sampler(self) -> DelaySampler:
        name = self._take("name")
        self._take("sym", "(")
        if name == "mixture":
            base = self.sampler()
            self._take("sym", ",")
            prob = self._take("num")
            self._take("sym", ",")
            spike = self.sampler()
            self._take("sym", ")")
            return DelaySampler.mixture(base, prob, spike)
        args, kwargs = [], {}
        while self._peek() != ("sym", ")"):
            if self._peek()[0] == "name":
                key = self._take("name")
                self._take("sym", "=")
                kwargs[key] = self._take("num")
            else:
                args.append(self._take("num"))
            if self._peek() == ("sym", ","):
                self.i += 1
        self._take("sym", ")")
        try:
            if name == "constant":
                return DelaySampler.constant(*args, **{k.replace("shift", "us"): v for k, v in kwargs.items()})
            if name == "gamma":
                kw = {"shift": "shift_us", "scale": "scale_us", "shape": "shape"}
                return DelaySampler.shifted_gamma(*args, **{kw[k]: v for k, v in kwargs.items()})
            if name == "moments":
                kw = {"shift": "shift_us", "mean": "mean_us", "sigma": "sigma_us"}
                return DelaySampler.from_moments(*args, **{kw[k]: v for k, v in kwargs.items()})
        except (TypeError, KeyError) as exc:
            raise SamplerError(f"bad arguments in sampler spec {self.text!r}") from exc
        raise SamplerError(f"unknown sampler family {name!r}")


_KNOWN_SCALARS = {
    "transport", "gains.P", "gains.D", "gains.K", "leader.inertia", "leader.damping",
    "follower.inertia", "follower.damping", "trajectory.kind", "trajectory.amplitude",
    "trajectory.frequency_hz", "trajectory.phase", "duration_s", "control_period_us",
    "comm_period_us", "leader_comm_phase_us", "follower_comm_phase_us", "initial.leader_q",
    "initial.leader_qd", "initial.follower_q", "initial.follower_qd", "seed",
}


def scenario_from_flat(flat: dict[str, str], where: dict[str, str] | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from flat keys. ``where`` maps keys to a location
    string (e.g. ``"line 12"``) used in error messages."""
    where = where or {}

    def loc(key):
        return f"{key} ({where[key]})" if key in where else key

    for key in flat:
        if key in _KNOWN_SCALARS:
            continue
        if key.startswith("transport.") and key[len("transport."):] in _SAMPLER_KEYS + _FLOAT_KEYS + _INT_KEYS:
            continue
        if re.fullmatch(r"contact\.\d+\.(start_s|end_s|torque)", key):
            continue
        if re.fullmatch(r"trajectory\.waypoint\.\d+\.(q|move_s|hold_s)", key):
            continue
        raise ConfigError(f"unknown scenario key {loc(key)}")

    try:
        kw = {}
        if "transport" in flat:
            kw["transport"] = flat["transport"].strip()
            if kw["transport"] not in KINDS:
                raise ConfigError(f"{loc('transport')}: unknown transport kind {kw['transport']!r}; "
                                  f"expected one of {', '.join(KINDS)}")
        overrides = {}
        for key, val in flat.items():
            if not key.startswith("transport."):
                continue
            name = key[len("transport."):]
            if name in _SAMPLER_KEYS:
                try:
                    overrides[name] = parse_sampler(val)
                except SamplerError as exc:
                    raise ConfigError(f"{loc(key)}: {exc}") from exc
            elif name in _FLOAT_KEYS:
                overrides[name] = parse_float(val, loc(key))
            else:
                overrides[name] = parse_int(val, loc(key))
        kw["transport_overrides"] = overrides

        gains = {}
        if "gains.P" in flat:
            gains["P"] = parse_vector(flat["gains.P"], loc("gains.P"))
        if "gains.D" in flat:
            gains["D"] = parse_vector(flat["gains.D"], loc("gains.D"))
        if "gains.K" in flat:
            gains["K"] = parse_float(flat["gains.K"], loc("gains.K"))
        try:
            kw["gains"] = ControlGains(**gains)
        except GainError as exc:
            keys = ", ".join(loc(k) for k in ("gains.P", "gains.D", "gains.K") if k in flat)
            raise ConfigError(f"{keys}: {exc}") from exc

        for side in ("leader", "follower"):
            model = {}
            for attr in ("inertia", "damping"):
                key = f"{side}.{attr}"
                if key in flat:
                    model[attr] = parse_vector(flat[key], loc(key))
            try:
                kw[f"{side}_model"] = ArmModel(**model)
            except ConfigError as exc:
                keys = ", ".join(loc(f"{side}.{a}") for a in ("inertia", "damping") if f"{side}.{a}" in flat)
                raise ConfigError(f"{keys}: {exc}") from exc

        kw["trajectory"] = _trajectory_from_flat(flat, loc)

        contacts = []
        idx = sorted({int(k.split(".")[1]) for k in flat if k.startswith("contact.")})
        for i in idx:
            try:
                start = parse_float(flat[f"contact.{i}.start_s"], loc(f"contact.{i}.start_s"))
                end = parse_float(flat[f"contact.{i}.end_s"], loc(f"contact.{i}.end_s"))
                torque = parse_vector(flat[f"contact.{i}.torque"], loc(f"contact.{i}.torque"))
            except KeyError as exc:
                raise ConfigError(f"contact.{i} is missing field {exc.args[0]}") from None
            contacts.append(ContactEvent(int(round(start * US_PER_S)), int(round(end * US_PER_S)), JointVector(torque)))
        kw["contacts"] = tuple(contacts)

        if "duration_s" in flat:
            kw["duration_us"] = int(round(parse_float(flat["duration_s"], loc("duration_s")) * US_PER_S))
        for key in ("control_period_us", "comm_period_us", "leader_comm_phase_us", "follower_comm_phase_us", "seed"):
            if key in flat:
                kw[key] = parse_int(flat[key], loc(key))

        for side in ("leader", "follower"):
            qk, qdk = f"initial.{side}_q", f"initial.{side}_qd"
            if qk in flat or qdk in flat:
                q = parse_vector(flat.get(qk, "0"), loc(qk))
                qd = parse_vector(flat.get(qdk, "0"), loc(qdk))
                kw[f"initial_{side}"] = ArmState(JointVector(q), JointVector(qd))
        return ScenarioConfig(**kw)
    except (ArityError, ConstructionError, GainError, SamplerError) as exc:
        raise ConfigError(str(exc)) from exc


def _trajectory_from_flat(flat, loc):
    kind = flat.get("trajectory.kind", "default").strip()
    if kind == "default":
        if any(k.startswith("trajectory.") for k in flat):
            raise ConfigError("trajectory parameters given without trajectory.kind")
        return DEFAULT_TRAJECTORY
    if kind == PSEUDO_EXPERT:
        return PSEUDO_EXPERT
    if kind == "still":
        return OperatorTrajectory.still()
    if kind == "sinusoidal":
        return OperatorTrajectory.sinusoidal(
            parse_vector(flat.get("trajectory.amplitude", "0"), loc("trajectory.amplitude")),
            parse_vector(flat.get("trajectory.frequency_hz", "0"), loc("trajectory.frequency_hz")),
            parse_vector(flat.get("trajectory.phase", "0"), loc("trajectory.phase")),
        )
    if kind == "waypoint":
        idx = sorted({int(k.split(".")[2]) for k in flat if k.startswith("trajectory.waypoint.")})
        wps = []
        for i in idx:
            p = f"trajectory.waypoint.{i}"
            if f"{p}.q" not in flat:
                raise ConfigError(f"{p} is missing field q")
            wps.append(Waypoint(
                JointVector(parse_vector(flat[f"{p}.q"], loc(f"{p}.q"))),
                parse_float(flat.get(f"{p}.move_s", "1"), loc(f"{p}.move_s")),
                parse_float(flat.get(f"{p}.hold_s", "0"), loc(f"{p}.hold_s")),
            ))
        return OperatorTrajectory("waypoint", waypoints=tuple(wps))
    raise ConfigError(f"unknown trajectory.kind {kind!r} ({loc('trajectory.kind')})")
