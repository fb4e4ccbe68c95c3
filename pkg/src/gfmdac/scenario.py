"""Scenario documents: JSON schema, cross-reference validation, bundled cases.

A scenario is a JSON object with ``sim``, ``network``, ``devices``, ``dac``,
``secondary``, ``events`` and ``metrics`` sections.  Validation collects every
problem (with a JSON-pointer style path) instead of stopping at the first.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .events import Event, EventKind, sort_events
from .models import DacConfig, DgParams, GflState, InverterParams, ParameterError
from .network import Line, NetworkModel
from .secondary import AttackSpec, SecondaryConfig

BUNDLED = ("scenario_a", "scenario_b", "scenario_c")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["network", "devices", "sim"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "omega0": _pos,
        "sim": {
            "type": "object",
            "required": ["t_end"],
            "properties": {
                "t_end": _pos,
                "dt": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.01},
                "integrator": {"enum": ["rk4", "euler"]},
                "stride": {"type": "integer", "minimum": 1},
                "dac_rate": {"enum": ["stage", "step"]},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "network": {
            "type": "object",
            "required": ["buses", "lines"],
            "properties": {
                "s_base_kva": _pos,
                "buses": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id"],
                        "properties": {"id": {"type": "integer"}, "name": {"type": "string"}},
                        "additionalProperties": False,
                    },
                },
                "lines": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "from", "to", "b"],
                        "properties": {
                            "id": {"type": "string"},
                            "from": {"type": "integer"},
                            "to": {"type": "integer"},
                            "b": _pos,
                            "closed": {"type": "boolean"},
                        },
                        "additionalProperties": False,
                    },
                },
                "loads": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["bus", "p"],
                        "properties": {"bus": {"type": "integer"}, "p": _num, "q": _num},
                        "additionalProperties": False,
                    },
                },
            },
            "additionalProperties": False,
        },
        "devices": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "kind", "bus"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"enum": ["gfm", "dg", "gfl", "grid"]},
                    "bus": {"type": "integer"},
                },
                "allOf": [
                    {
                        "if": {"properties": {"kind": {"const": "gfm"}}},
                        "then": {
                            "required": ["s_inv", "m_p", "tau", "p_set"],
                            "properties": {
                                "id": True, "kind": True, "bus": True,
                                "s_inv": _pos, "m_p": _pos, "tau": _pos, "tau_f": {"type": "number", "minimum": 0},
                                "p_min": _num, "p_max": _num, "omega0": _pos, "storage": {"type": "boolean"},
                                "p_set": _num, "q_inv": _num, "secondary": {"type": "boolean"},
                                "dac": {"type": "object"},
                            },
                            "additionalProperties": False,
                        },
                    },
                    {
                        "if": {"properties": {"kind": {"const": "dg"}}},
                        "then": {
                            "required": ["rating", "m_p", "tau", "p_set"],
                            "properties": {
                                "id": True, "kind": True, "bus": True,
                                "rating": _pos, "m_p": _pos, "tau": _pos, "omega0": _pos, "p_set": _num,
                            },
                            "additionalProperties": False,
                        },
                    },
                    {
                        "if": {"properties": {"kind": {"const": "grid"}}},
                        "then": {
                            "required": ["rating", "m_p", "tau"],
                            "properties": {
                                "id": True, "kind": True, "bus": True,
                                "rating": _pos, "m_p": _pos, "tau": _pos, "omega0": _pos, "p_set": _num,
                            },
                            "additionalProperties": False,
                        },
                    },
                    {
                        "if": {"properties": {"kind": {"const": "gfl"}}},
                        "then": {
                            "required": ["rating", "p_out"],
                            "properties": {
                                "id": True, "kind": True, "bus": True,
                                "rating": _pos, "p_out": _num, "f_trip": _pos, "t_dwell": _pos,
                            },
                            "additionalProperties": False,
                        },
                    },
                ],
            },
        },
        "dac": {
            "type": "object",
            "properties": {
                "enabled": {"type": "boolean"},
                "omega_min": _num,
                "omega_max": _num,
                "alpha": _pos,
                "q": {"type": "integer", "minimum": 1},
                "p_set_min": _num,
            },
            "additionalProperties": False,
        },
        "secondary": {
            "type": "object",
            "properties": {
                "enabled": {"type": "boolean"},
                "period": _pos,
                "k_i": _pos,
                "rounds": {"type": "integer", "minimum": 0},
                "mixing": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "attack": {
                    "type": "object",
                    "required": ["targets", "t_on", "t_off"],
                    "properties": {
                        "targets": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                        "t_on": {"type": "number", "minimum": 0},
                        "t_off": _pos,
                        "mode": {"const": "freeze"},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["at", "kind"],
                "properties": {
                    "at": {"type": "number", "minimum": 0},
                    "kind": {"enum": ["breaker_open", "breaker_close", "load_step", "dg_redispatch"]},
                    "target": {"type": ["string", "integer"]},
                    "targets": {"type": "array", "items": {"type": "string"}},
                    "value": _num,
                    "dq": _num,
                    "restore": {"type": "boolean"},
                },
                "additionalProperties": False,
            },
        },
        "metrics": {
            "type": "object",
            "properties": {
                "monitor_bus": {"type": "integer"},
                "violation_threshold": _pos,
                "band_tolerance": {"type": "number", "minimum": 0},
                "settle_window": _pos,
                "collapse_f_min": _pos,
                "collapse_f_max": _pos,
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class Issue:
    path: str
    message: str

    def __str__(self):
        return f"{self.path or '/'}: {self.message}"


class ScenarioValidationError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt: float = 1e-3
    integrator: str = "rk4"
    stride: int = 10
    dac_rate: str = "stage"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.dt <= 0.01:
            raise ValueError(f"dt must lie in (0, 0.01], got {self.dt}")
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dac_rate not in ("stage", "step"):
            raise ValueError(f"unknown dac_rate {self.dac_rate!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class MetricsConfig:
    monitor_bus: int
    violation_threshold: float = 56.5
    omega_min: float = 59.9
    omega_max: float = 60.1
    band_tolerance: float = 0.01
    settle_window: float = 1.0
    collapse_f_min: float = 55.0
    collapse_f_max: float = 65.0


@dataclass(frozen=True)
class GfmSpec:
    id: str
    bus: int
    params: InverterParams
    p_set: float
    q_inv: float
    dac: DacConfig
    secondary: bool = True


@dataclass(frozen=True)
class DgSpec:
    id: str
    bus: int
    params: DgParams
    p_set: float


@dataclass(frozen=True)
class GflSpec:
    id: str
    bus: int
    state: GflState


@dataclass
class ScenarioDoc:
    name: str
    network: NetworkModel
    gfms: list
    dgs: list
    gfls: list
    dac: DacConfig
    secondary: SecondaryConfig
    attack: AttackSpec | None
    events: list
    sim: SimConfig
    metrics: MetricsConfig
    raw: dict = field(repr=False, default_factory=dict)
    grids: list = field(default_factory=list)  # stiff upstream sources, DG-like

    @property
    def sources(self):
        """Angle sources in kernel order: GFMs, DGs, grid sources, each in declaration order."""
        return [*self.gfms, *self.dgs, *self.grids]

    def device(self, dev_id):
        for d in (*self.gfms, *self.dgs, *self.grids, *self.gfls):
            if d.id == dev_id:
                return d
        raise KeyError(dev_id)


def _schema_issues(doc) -> list[Issue]:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    issues = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        path = "/" + "/".join(str(p) for p in err.absolute_path)
        issues.append(Issue(path, err.message))
    return issues


def _dac_config(base: dict, override: dict | None) -> dict:
    merged = dict(base)
    merged.update(override or {})
    return merged


def _semantic_issues(doc) -> list[Issue]:
    issues: list[Issue] = []
    add = lambda path, msg: issues.append(Issue(path, msg))  # noqa: E731
    omega0 = doc.get("omega0", 60.0)
    net = doc["network"]
    bus_ids = [b["id"] for b in net["buses"]]
    if len(set(bus_ids)) != len(bus_ids):
        add("/network/buses", "duplicate bus ids")
    buses = set(bus_ids)
    line_ids = set()
    for i, ln in enumerate(net["lines"]):
        if ln["id"] in line_ids:
            add(f"/network/lines/{i}/id", f"duplicate line id {ln['id']!r}")
        line_ids.add(ln["id"])
        for end in ("from", "to"):
            if ln[end] not in buses:
                add(f"/network/lines/{i}/{end}", f"unknown bus {ln[end]}")
        if ln["from"] == ln["to"]:
            add(f"/network/lines/{i}", "line connects a bus to itself")
    for i, ld in enumerate(net.get("loads", [])):
        if ld["bus"] not in buses:
            add(f"/network/loads/{i}/bus", f"unknown bus {ld['bus']}")

    dev_ids = {}
    source_bus = {}
    dac_base = doc.get("dac", {})
    for i, d in enumerate(doc["devices"]):
        p = f"/devices/{i}"
        if d["id"] in dev_ids:
            add(f"{p}/id", f"duplicate device id {d['id']!r}")
        dev_ids[d["id"]] = d["kind"]
        if d["bus"] not in buses:
            add(f"{p}/bus", f"unknown bus {d['bus']}")
        if d["kind"] in ("gfm", "dg", "grid"):
            if d["bus"] in source_bus:
                add(f"{p}/bus", f"bus {d['bus']} already hosts source {source_bus[d['bus']]!r}")
            source_bus.setdefault(d["bus"], d["id"])
        if d["kind"] == "gfm":
            p_min, p_max = d.get("p_min", 0.0), d.get("p_max", 1.0)
            if p_min > p_max:
                add(f"{p}/p_min", "p_min exceeds p_max")
            if p_min < 0 and not d.get("storage", False):
                add(f"{p}/p_min", "p_min < 0 requires storage: true")
            if abs(d.get("q_inv", 0.0)) > 1.0:
                add(f"{p}/q_inv", "|q_inv| > 1 pu: apparent power already exceeds the rating")
            cfg = _dac_config(dac_base, d.get("dac"))
            unknown = set(cfg) - {"enabled", "omega_min", "omega_max", "alpha", "q", "p_set_min"}
            if unknown:
                add(f"{p}/dac", f"unknown keys {sorted(unknown)}")
                continue
            q = cfg.get("q", 3)
            if not isinstance(q, int) or isinstance(q, bool) or q < 1 or q % 2 == 0:
                add(f"{p}/dac/q" if "q" in (d.get("dac") or {}) else "/dac/q",
                    f"q must be an odd positive integer (barrier sign preservation), got {q!r}")
            w_min, w_max = cfg.get("omega_min", 59.9), cfg.get("omega_max", 60.1)
            dev_w0 = d.get("omega0", omega0)
            if not w_min < w_max:
                add("/dac", f"omega_min ({w_min}) must be below omega_max ({w_max})")
            elif not w_min < dev_w0 < w_max:
                add(f"{p}", f"safe band [{w_min}, {w_max}] must contain omega0 {dev_w0}")
            if not cfg.get("alpha", 1.0) > 0:
                add("/dac/alpha", "alpha must be > 0")
    if not source_bus:
        add("/devices", "at least one gfm, dg or grid source is required")

    sec = doc.get("secondary", {})
    atk = sec.get("attack")
    if atk:
        if not atk["t_on"] < atk["t_off"]:
            add("/secondary/attack", "attack window needs t_on < t_off")
        for j, tgt in enumerate(atk["targets"]):
            if dev_ids.get(tgt) != "gfm":
                add(f"/secondary/attack/targets/{j}", f"{tgt!r} is not a gfm device")

    # events after t_end are legal (a shortened run simply never reaches them)
    for i, ev in enumerate(doc.get("events", [])):
        p = f"/events/{i}"
        kind = ev["kind"]
        if kind in ("breaker_open", "breaker_close"):
            if ev.get("target") not in line_ids:
                add(f"{p}/target", f"unknown line {ev.get('target')!r}")
        elif kind == "load_step":
            if ev.get("target") not in buses:
                add(f"{p}/target", f"unknown bus {ev.get('target')!r}")
            if "value" not in ev:
                add(f"{p}/value", "load_step needs value (pu)")
        elif kind == "dg_redispatch":
            targets = ev.get("targets") or ([ev["target"]] if "target" in ev else [])
            if not targets:
                add(p, "dg_redispatch needs target or targets")
            for tgt in targets:
                if dev_ids.get(tgt) != "dg":
                    add(f"{p}/targets", f"{tgt!r} is not a dg device")
            if not ev.get("restore", False) and "value" not in ev:
                add(p, "dg_redispatch needs value or restore: true")

    mon = doc.get("metrics", {}).get("monitor_bus")
    if mon is not None and mon not in buses:
        add("/metrics/monitor_bus", f"unknown bus {mon}")
    return issues


def _build(doc) -> ScenarioDoc:
    omega0 = doc.get("omega0", 60.0)
    net = doc["network"]
    dac_base = doc.get("dac", {})
    gfms, dgs, gfls, grids = [], [], [], []
    for d in doc["devices"]:
        if d["kind"] == "gfm":
            params = InverterParams(
                s_inv=d["s_inv"], m_p=d["m_p"], tau=d["tau"], p_min=d.get("p_min", 0.0),
                p_max=d.get("p_max", 1.0), omega0=d.get("omega0", omega0),
                tau_f=d.get("tau_f", 0.0), storage=d.get("storage", False),
            )
            cfg = DacConfig(**_dac_config(dac_base, d.get("dac")))
            cfg.check_nominal(params.omega0)
            gfms.append(GfmSpec(d["id"], d["bus"], params, d["p_set"], d.get("q_inv", 0.0), cfg,
                                d.get("secondary", True)))
        elif d["kind"] == "dg":
            params = DgParams(rating=d["rating"], m_p=d["m_p"], tau=d["tau"], omega0=d.get("omega0", omega0))
            dgs.append(DgSpec(d["id"], d["bus"], params, d["p_set"]))
        elif d["kind"] == "grid":
            params = DgParams(rating=d["rating"], m_p=d["m_p"], tau=d["tau"], omega0=d.get("omega0", omega0))
            grids.append(DgSpec(d["id"], d["bus"], params, d.get("p_set", 0.0)))
        else:
            gfls.append(GflSpec(d["id"], d["bus"], GflState(
                rating=d["rating"], p_out=d["p_out"], f_trip=d.get("f_trip", 56.5),
                t_dwell=d.get("t_dwell", 0.160))))
    sources = tuple(s.id for s in (*gfms, *dgs, *grids))
    placements = {d["id"]: d["bus"] for d in doc["devices"]}
    loads = {}
    for ld in net.get("loads", []):
        p, q = loads.get(ld["bus"], (0.0, 0.0))
        loads[ld["bus"]] = (p + ld["p"], q + ld.get("q", 0.0))
    network = NetworkModel(
        buses=tuple(b["id"] for b in net["buses"]),
        lines=tuple(Line(ln["id"], ln["from"], ln["to"], ln["b"], ln.get("closed", True)) for ln in net["lines"]),
        placements=placements,
        sources=sources,
        loads=loads,
        s_base=net.get("s_base_kva", 1000.0),
    )
    sec = doc.get("secondary", {})
    secondary = SecondaryConfig(
        enabled=sec.get("enabled", False), period=sec.get("period", 2.0), k_i=sec.get("k_i", 1.0),
        rounds=sec.get("rounds", 3), mixing=sec.get("mixing", 0.5), omega0=omega0,
    )
    attack = None
    if sec.get("attack"):
        a = sec["attack"]
        attack = AttackSpec(frozenset(a["targets"]), a["t_on"], a["t_off"], a.get("mode", "freeze"))
    events = []
    for i, ev in enumerate(doc.get("events", [])):
        kind = EventKind(ev["kind"])
        targets = tuple(ev.get("targets") or ([ev["target"]] if kind is EventKind.DG_REDISPATCH and "target" in ev else []))
        events.append(Event(
            at=float(ev["at"]), kind=kind, target=ev.get("target"), value=ev.get("value"),
            dq=ev.get("dq", 0.0), order=i, targets=targets, restore=ev.get("restore", False),
        ))
    s = doc["sim"]
    sim = SimConfig(t_end=s["t_end"], dt=s.get("dt", 1e-3), integrator=s.get("integrator", "rk4"),
                    stride=s.get("stride", 10), dac_rate=s.get("dac_rate", "stage"), seed=s.get("seed", 0))
    m = doc.get("metrics", {})
    dac = DacConfig(**dac_base)
    first_src_bus = next(iter(src.bus for src in (*gfms, *dgs, *grids)))
    metrics = MetricsConfig(
        monitor_bus=m.get("monitor_bus", first_src_bus),
        violation_threshold=m.get("violation_threshold", 56.5),
        omega_min=dac.omega_min, omega_max=dac.omega_max,
        band_tolerance=m.get("band_tolerance", 0.01),
        settle_window=m.get("settle_window", 1.0),
        collapse_f_min=m.get("collapse_f_min", 55.0),
        collapse_f_max=m.get("collapse_f_max", 65.0),
    )
    return ScenarioDoc(doc.get("name", "scenario"), network, gfms, dgs, gfls, dac, secondary, attack,
                       sort_events(events), sim, metrics, raw=copy.deepcopy(doc), grids=grids)


def validate_document(doc) -> ScenarioDoc:
    """Validate a decoded document; raise :class:`ScenarioValidationError` listing every issue."""
    if not isinstance(doc, dict):
        raise ScenarioValidationError([Issue("", "scenario must be a JSON object")])
    issues = _schema_issues(doc)
    if not issues:
        try:
            issues = _semantic_issues(doc)
        except (KeyError, TypeError, ValueError) as exc:  # defensive: never crash on odd input
            issues = [Issue("", f"malformed scenario: {exc!r}")]
    if issues:
        raise ScenarioValidationError(issues)
    try:
        return _build(doc)
    except (ParameterError, ValueError) as exc:
        raise ScenarioValidationError([Issue("", str(exc))]) from exc


def parse_and_validate(text: str) -> ScenarioDoc:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError([Issue("", f"invalid JSON: {exc}")]) from exc
    return validate_document(doc)


def bundled_path(name: str):
    return resources.files("gfmdac") / "scenarios" / f"{name}.json"


def load_text(path_or_name) -> str:
    """Read a scenario file, falling back to a bundled scenario name."""
    p = Path(path_or_name)
    if p.exists():
        return p.read_text()
    if str(path_or_name) in BUNDLED:
        return bundled_path(str(path_or_name)).read_text()
    raise FileNotFoundError(f"no scenario file or bundled scenario named {path_or_name!r}")


def load_scenario(path_or_name) -> ScenarioDoc:
    return parse_and_validate(load_text(path_or_name))


def with_overrides(scenario: ScenarioDoc, *, dac=None, dt=None, t_end=None, params=None) -> ScenarioDoc:
    """Return a re-validated copy with CLI-style overrides.

    ``params`` maps ``"<device>.<field>"`` to a value.
    """
    doc = copy.deepcopy(scenario.raw)
    if dac is not None:
        doc.setdefault("dac", {})["enabled"] = bool(dac)
        for d in doc["devices"]:
            if d["kind"] == "gfm" and "dac" in d:
                d["dac"]["enabled"] = bool(dac)
    if dt is not None:
        doc["sim"]["dt"] = dt
    if t_end is not None:
        doc["sim"]["t_end"] = t_end
    for path, value in (params or {}).items():
        set_param(doc, path, value)
    return validate_document(doc)


def set_param(doc: dict, path: str, value) -> None:
    dev_id, _, fld = path.partition(".")
    if not fld:
        raise ScenarioValidationError([Issue("", f"parameter path {path!r} must look like <device>.<field>")])
    for d in doc["devices"]:
        if d["id"] == dev_id:
            if fld in ("id", "kind", "bus") or not isinstance(d.get(fld, 0.0), (int, float)) or isinstance(d.get(fld), bool):
                raise ScenarioValidationError([Issue(f"/devices/{dev_id}/{fld}", "not a numeric device field")])
            d[fld] = value
            return
    raise ScenarioValidationError([Issue("", f"unknown device {dev_id!r} in parameter path {path!r}")])
