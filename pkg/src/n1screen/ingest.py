"""Network ingestion: IEEE Common Data Format and a JSON fixture format.

Both readers produce a :class:`NetworkModel` in per-unit on the case MVA
base, with angles in radians. ``validate_network`` reports invariant
violations as diagnostics instead of raising.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any


class BusType(str, Enum):
    PQ = "PQ"
    PV = "PV"
    SLACK = "Slack"


class NetworkFormatError(ValueError):
    """Base class for input format problems."""


class MissingSection(NetworkFormatError):
    pass


class MalformedRecord(NetworkFormatError):
    def __init__(self, line: int, fld: str, reason: str):
        super().__init__(f"line {line}: field '{fld}': {reason}")
        self.line = line
        self.field = fld
        self.reason = reason


class NoSlackBus(NetworkFormatError):
    pass


class DuplicateBusId(NetworkFormatError):
    def __init__(self, bus_id: int):
        super().__init__(f"duplicate bus id {bus_id}")
        self.bus_id = bus_id


class SchemaError(NetworkFormatError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


@dataclass
class BusRecord:
    id: int
    bus_type: BusType
    v_mag: float = 1.0
    v_ang: float = 0.0  # rad
    p_load: float = 0.0
    q_load: float = 0.0
    p_gen: float = 0.0
    q_gen: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    base_kv: float = 0.0
    name: str = ""

    @property
    def p_sched(self) -> float:
        return self.p_gen - self.p_load

    @property
    def q_sched(self) -> float:
        return self.q_gen - self.q_load


@dataclass
class BranchRecord:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    tap: float = 1.0
    rating_mva: float = 0.0
    status: bool = True


@dataclass
class NetworkModel:
    base_mva: float
    buses: list[BusRecord]
    branches: list[BranchRecord]
    case_name: str = ""

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def slack(self) -> BusRecord:
        return next(b for b in self.buses if b.bus_type is BusType.SLACK)


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    ref: int | None = None

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.code}: {self.message}"


# --------------------------------------------------------------------------
# IEEE CDF
# --------------------------------------------------------------------------

# 1-based inclusive column ranges from the 1973 exchange format.
_BUS_COLUMNS = {
    "area": (19, 20),
    "zone": (21, 23),
    "type": (25, 26),
    "v_mag": (28, 33),
    "v_ang": (34, 40),
    "p_load": (41, 49),
    "q_load": (50, 59),
    "p_gen": (60, 67),
    "q_gen": (68, 75),
    "base_kv": (77, 83),
    "v_desired": (85, 90),
    "q_max": (91, 98),
    "q_min": (99, 106),
    "g_shunt": (107, 114),
    "b_shunt": (115, 122),
}
_BUS_TOKEN_ORDER = list(_BUS_COLUMNS)

_BRANCH_COLUMNS = {
    "from_bus": (1, 4),
    "to_bus": (6, 9),
    "area": (11, 12),
    "zone": (14, 15),
    "circuit": (17, 17),
    "type": (19, 19),
    "r": (20, 29),
    "x": (30, 40),
    "b_charging": (41, 50),
    "rating1": (51, 55),
    "rating2": (57, 61),
    "rating3": (63, 67),
    "control_bus": (69, 72),
    "side": (74, 74),
    "tap": (77, 82),
}
_BRANCH_TOKEN_ORDER = list(_BRANCH_COLUMNS)

_CDF_BUS_TYPES = {0: BusType.PQ, 1: BusType.PQ, 2: BusType.PV, 3: BusType.SLACK}


def _columns(line: str, layout: dict[str, tuple[int, int]]) -> dict[str, float]:
    out = {}
    for key, (a, b) in layout.items():
        raw = line[a - 1 : b].strip()
        out[key] = float(raw) if raw else 0.0
    return out


def _tokens(tokens: list[str], order: list[str], lineno: int) -> dict[str, float]:
    out = {}
    for key, tok in zip(order, tokens):
        try:
            out[key] = float(tok)
        except ValueError:
            raise MalformedRecord(lineno, key, f"not a number: {tok!r}") from None
    return out


def _bus_fields(line: str, lineno: int) -> tuple[int, str, dict[str, float]]:
    try:
        bus_id = int(line[0:4]) if line[0:4].strip() else int(line.split()[0])
    except (ValueError, IndexError):
        raise MalformedRecord(lineno, "bus_number", "not an integer") from None
    name = line[5:17].strip()
    try:
        vals = _columns(line, _BUS_COLUMNS)
        if vals["type"] != int(vals["type"]):
            raise ValueError
    except ValueError:
        # drifted padding: everything after the name field is whitespace separated
        toks = line[17:].split()
        if len(toks) < 10:
            raise MalformedRecord(lineno, "bus", f"expected at least 10 numeric fields, got {len(toks)}")
        vals = dict.fromkeys(_BUS_TOKEN_ORDER, 0.0)
        vals.update(_tokens(toks, _BUS_TOKEN_ORDER, lineno))
    return bus_id, name, vals


def _branch_fields(line: str, lineno: int) -> dict[str, float]:
    try:
        vals = _columns(line, _BRANCH_COLUMNS)
    except ValueError:
        toks = line.split()
        if len(toks) < 9:
            raise MalformedRecord(lineno, "branch", f"expected at least 9 fields, got {len(toks)}")
        vals = dict.fromkeys(_BRANCH_TOKEN_ORDER, 0.0)
        vals.update(_tokens(toks, _BRANCH_TOKEN_ORDER, lineno))
    return vals


def _section(lines: list[str], header: str) -> tuple[int, list[tuple[int, str]]]:
    start = next((k for k, ln in enumerate(lines) if ln.lstrip().upper().startswith(header)), None)
    if start is None:
        raise MissingSection(f"no '{header}' section")
    records = []
    for k in range(start + 1, len(lines)):
        ln = lines[k]
        if ln.strip().startswith("-999"):
            return start, records
        if ln.strip():
            records.append((k + 1, ln))
    raise MissingSection(f"'{header}' section is not terminated by -999")


def _title(line: str) -> tuple[float, str]:
    try:
        base = float(line[31:37])
        name = line[45:].strip()
    except ValueError:
        # fall back to the first float after the originator field
        base = None
        for tok in line[10:].split():
            try:
                base = float(tok)
                break
            except ValueError:
                continue
        if base is None:
            raise MalformedRecord(1, "base_mva", "no MVA base on title card") from None
        name = line.strip()
    return base, name


def parse_cdf(text: str, rating_tier: int = 1) -> NetworkModel:
    """Parse IEEE Common Data Format text into a per-unit network model.

    Fixed column positions are tried first for each record; records whose
    padding has drifted fall back to whitespace tokens. Item counts on the
    section headers are ignored (several archived copies carry wrong ones);
    sections run to their ``-999`` sentinel.

    Args:
        text: File content.
        rating_tier: Which of the three branch MVA ratings is the flow limit.

    Raises:
        MissingSection, MalformedRecord, NoSlackBus, DuplicateBusId
    """
    if rating_tier not in (1, 2, 3):
        raise ValueError("rating_tier must be 1, 2 or 3")
    lines = text.splitlines()
    if not lines:
        raise MissingSection("empty input")
    base_mva, case_name = _title(lines[0])
    if not base_mva > 0:
        raise MalformedRecord(1, "base_mva", f"must be positive, got {base_mva}")

    _, bus_lines = _section(lines, "BUS DATA FOLLOWS")
    _, branch_lines = _section(lines, "BRANCH DATA FOLLOWS")

    buses: list[BusRecord] = []
    seen: set[int] = set()
    for lineno, line in bus_lines:
        bus_id, name, v = _bus_fields(line, lineno)
        if bus_id in seen:
            raise DuplicateBusId(bus_id)
        seen.add(bus_id)
        code = int(v["type"])
        if code not in _CDF_BUS_TYPES:
            raise MalformedRecord(lineno, "type", f"unknown bus type {code}")
        buses.append(
            BusRecord(
                id=bus_id,
                bus_type=_CDF_BUS_TYPES[code],
                v_mag=v["v_mag"],
                v_ang=math.radians(v["v_ang"]),
                p_load=v["p_load"] / base_mva,
                q_load=v["q_load"] / base_mva,
                p_gen=v["p_gen"] / base_mva,
                q_gen=v["q_gen"] / base_mva,
                g_shunt=v["g_shunt"],
                b_shunt=v["b_shunt"],
                base_kv=v["base_kv"],
                name=name,
            )
        )
    if not any(b.bus_type is BusType.SLACK for b in buses):
        raise NoSlackBus("no bus of type 3 in BUS DATA")

    branches = []
    for ordinal, (lineno, line) in enumerate(branch_lines, start=1):
        v = _branch_fields(line, lineno)
        for key in ("from_bus", "to_bus"):
            if v[key] != int(v[key]):
                raise MalformedRecord(lineno, key, "not an integer")
        branches.append(
            BranchRecord(
                id=ordinal,
                from_bus=int(v["from_bus"]),
                to_bus=int(v["to_bus"]),
                r=v["r"],
                x=v["x"],
                b_charging=v["b_charging"],
                tap=v["tap"] if v["tap"] > 0 else 1.0,
                rating_mva=v[f"rating{rating_tier}"],
            )
        )
    return NetworkModel(base_mva=base_mva, buses=buses, branches=branches, case_name=case_name)


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

_JSON_BUS_TYPES = {"pq": BusType.PQ, "pv": BusType.PV, "slack": BusType.SLACK}


def _get(obj: dict, key: str, path: str, kind: type | tuple, default: Any = ...) -> Any:
    if key not in obj:
        if default is ...:
            raise SchemaError(f"{path}.{key}" if path else key, "missing key")
        return default
    val = obj[key]
    # bool is an int subclass; never accept it where a number is expected
    if isinstance(val, bool) and kind is not bool:
        raise SchemaError(f"{path}.{key}" if path else key, f"expected {_kind_name(kind)}, got bool")
    if not isinstance(val, kind):
        raise SchemaError(f"{path}.{key}" if path else key, f"expected {_kind_name(kind)}, got {type(val).__name__}")
    return val


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


_NUM = (int, float)


def parse_json_network(text: str) -> NetworkModel:
    """Parse the JSON fixture format (MW/MVAR, degrees) into a per-unit model.

    Raises:
        SchemaError: missing or mistyped key, unknown bus reference,
            duplicate bus id; ``path`` names the offending JSON location.
        NoSlackBus: no bus of type ``slack``.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("$", "top level must be an object")
    base = float(_get(doc, "base_mva", "", _NUM))
    if not base > 0:
        raise SchemaError("base_mva", "must be positive")
    case_name = _get(doc, "case_name", "", str, "")

    buses: list[BusRecord] = []
    ids: set[int] = set()
    for k, raw in enumerate(_get(doc, "buses", "", list)):
        path = f"buses[{k}]"
        if not isinstance(raw, dict):
            raise SchemaError(path, "expected object")
        bus_id = _get(raw, "id", path, int)
        if bus_id in ids:
            raise SchemaError(f"{path}.id", f"duplicate bus id {bus_id}")
        ids.add(bus_id)
        type_name = _get(raw, "type", path, str)
        if type_name.lower() not in _JSON_BUS_TYPES:
            raise SchemaError(f"{path}.type", f"unknown bus type {type_name!r}")
        buses.append(
            BusRecord(
                id=bus_id,
                bus_type=_JSON_BUS_TYPES[type_name.lower()],
                v_mag=float(_get(raw, "v_mag", path, _NUM, 1.0)),
                v_ang=math.radians(_get(raw, "v_ang", path, _NUM, 0.0)),
                p_load=_get(raw, "p_load", path, _NUM, 0.0) / base,
                q_load=_get(raw, "q_load", path, _NUM, 0.0) / base,
                p_gen=_get(raw, "p_gen", path, _NUM, 0.0) / base,
                q_gen=_get(raw, "q_gen", path, _NUM, 0.0) / base,
                g_shunt=float(_get(raw, "g_shunt", path, _NUM, 0.0)),
                b_shunt=float(_get(raw, "b_shunt", path, _NUM, 0.0)),
                base_kv=float(_get(raw, "base_kv", path, _NUM, 0.0)),
                name=_get(raw, "name", path, str, ""),
            )
        )

    branches = []
    for k, raw in enumerate(_get(doc, "branches", "", list)):
        path = f"branches[{k}]"
        if not isinstance(raw, dict):
            raise SchemaError(path, "expected object")
        ends = {}
        for key in ("from", "to"):
            ends[key] = _get(raw, key, path, int)
            if ends[key] not in ids:
                raise SchemaError(f"{path}.{key}", f"unknown bus {ends[key]}")
        tap = float(_get(raw, "tap", path, _NUM, 1.0))
        branches.append(
            BranchRecord(
                id=_get(raw, "id", path, int, k + 1),
                from_bus=ends["from"],
                to_bus=ends["to"],
                r=float(_get(raw, "r", path, _NUM, 0.0)),
                x=float(_get(raw, "x", path, _NUM)),
                b_charging=float(_get(raw, "b", path, _NUM, 0.0)),
                tap=tap if tap > 0 else 1.0,
                rating_mva=float(_get(raw, "rating_mva", path, _NUM, 0.0)),
                status=bool(_get(raw, "status", path, (int, bool), 1)),
            )
        )
    if not any(b.bus_type is BusType.SLACK for b in buses):
        raise NoSlackBus("no bus of type 'slack'")
    return NetworkModel(base_mva=base, buses=buses, branches=branches, case_name=case_name)


def network_to_json(model: NetworkModel, indent: int | None = 2) -> str:
    """Serialize a model to the JSON fixture format (inverse of ``parse_json_network``)."""
    base = model.base_mva
    doc = {
        "case_name": model.case_name,
        "base_mva": base,
        "buses": [
            {
                "id": b.id,
                "name": b.name,
                "type": b.bus_type.value.lower(),
                "v_mag": b.v_mag,
                "v_ang": math.degrees(b.v_ang),
                "p_load": b.p_load * base,
                "q_load": b.q_load * base,
                "p_gen": b.p_gen * base,
                "q_gen": b.q_gen * base,
                "g_shunt": b.g_shunt,
                "b_shunt": b.b_shunt,
                "base_kv": b.base_kv,
            }
            for b in model.buses
        ],
        "branches": [
            {
                "id": br.id,
                "from": br.from_bus,
                "to": br.to_bus,
                "r": br.r,
                "x": br.x,
                "b": br.b_charging,
                "tap": br.tap,
                "rating_mva": br.rating_mva,
                "status": int(br.status),
            }
            for br in model.branches
        ],
    }
    return json.dumps(doc, indent=indent)


def load_network(path: str, fmt: str | None = None) -> NetworkModel:
    """Read a network file; ``fmt`` is ``"cdf"`` or ``"json"`` (default by extension)."""
    if fmt is None:
        fmt = "json" if str(path).lower().endswith(".json") else "cdf"
    with open(path, encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    if fmt == "json":
        return parse_json_network(text)
    if fmt == "cdf":
        return parse_cdf(text)
    raise ValueError(f"unknown format {fmt!r}")


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def validate_network(model: NetworkModel) -> list[Diagnostic]:
    """Check the model invariants; returns one diagnostic per violation."""
    diags: list[Diagnostic] = []

    def err(code, msg, ref=None):
        diags.append(Diagnostic(Severity.ERROR, code, msg, ref))

    def warn(code, msg, ref=None):
        diags.append(Diagnostic(Severity.WARNING, code, msg, ref))

    if not (model.base_mva > 0 and math.isfinite(model.base_mva)):
        err("NonPositiveBaseMva", f"base_mva={model.base_mva}")

    slacks = [b.id for b in model.buses if b.bus_type is BusType.SLACK]
    if not slacks:
        err("NoSlack", "no slack bus")
    elif len(slacks) > 1:
        err("MultipleSlack", f"slack buses {slacks}")

    ids: set[int] = set()
    for b in model.buses:
        if b.id in ids:
            err("DuplicateBusId", f"bus {b.id} appears twice", b.id)
        ids.add(b.id)
        if not b.v_mag > 0:
            err("NonPositiveVoltage", f"bus {b.id} v_mag={b.v_mag}", b.id)
        if not (math.isfinite(b.p_sched) and math.isfinite(b.q_sched)):
            err("NonFiniteInjection", f"bus {b.id} has a non-finite injection", b.id)

    degree = dict.fromkeys(ids, 0)
    for br in model.branches:
        bad_ref = False
        for end in (br.from_bus, br.to_bus):
            if end not in ids:
                err("UnknownBus", f"branch {br.id} references unknown bus {end}", br.id)
                bad_ref = True
        if br.from_bus == br.to_bus:
            err("SelfLoop", f"branch {br.id} connects bus {br.from_bus} to itself", br.id)
        if br.x == 0 or not math.isfinite(br.x):
            err("ZeroReactance", f"branch {br.id} has x={br.x}", br.id)
        if not br.tap > 0:
            err("NonPositiveTap", f"branch {br.id} tap={br.tap}", br.id)
        if br.rating_mva == 0:
            warn("ZeroRating", f"branch {br.id} has no flow limit", br.id)
        if br.status and not bad_ref and br.from_bus != br.to_bus:
            degree[br.from_bus] += 1
            degree[br.to_bus] += 1

    for b in model.buses:
        if degree.get(b.id) == 0 and len(model.buses) > 1:
            warn("IsolatedBus", f"bus {b.id} has no in-service branch", b.id)
    return diags


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diags)
