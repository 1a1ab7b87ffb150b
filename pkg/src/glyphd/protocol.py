"""Action vocabulary and JSON-RPC wire framing.

Every message on the wire is a JSON-RPC 2.0 notification with method
``process`` whose params are an :class:`ActionMessage`: a session id plus one
action. Actions are flat objects discriminated by ``kind``; the set of known
kinds and their payload schemas lives in an :class:`ActionRegistry`, which is
the extension point for custom actions.

Encoding is canonical: keys in declaration order, no insignificant whitespace,
UTF-8, numbers as Python's shortest round-trippable decimals. Decoding never
raises anything but :class:`ProtocolError` subclasses on arbitrary input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

from .gmodel import GGraph, ModelJsonError, Point, Size, element_to_json, graph_from_json

# Action localities.
CLIENT_LOCAL = "client-local"
SERVER_BOUND = "server-bound"
SERVER_TO_CLIENT = "server-to-client"

METHOD = "process"


class ProtocolError(Exception):
    """Base for every wire-level failure."""


class MalformedJson(ProtocolError):
    pass


class WrongMethod(ProtocolError):
    pass


class UnregisteredKind(ProtocolError):
    def __init__(self, kind: str):
        super().__init__(f"action kind {kind!r} is not registered")
        self.kind = kind


class SchemaViolation(ProtocolError):
    """Payload does not match the registered schema; names the offending field."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


class DuplicateKind(ProtocolError):
    def __init__(self, kind: str):
        super().__init__(f"action kind {kind!r} is already registered")
        self.kind = kind


class RegistryFrozen(ProtocolError):
    def __init__(self) -> None:
        super().__init__("registry is frozen; register custom actions before serving")


@dataclass(frozen=True)
class Marker:
    """A validation result attached to a diagram element."""

    element_id: str
    severity: str  # info | warning | error
    message: str


SEVERITIES = ("info", "warning", "error")


@dataclass(frozen=True)
class Action:
    kind: str
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.payload[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.payload.get(key, default)


@dataclass(frozen=True)
class ActionMessage:
    client_id: str
    action: Action


@dataclass(frozen=True)
class FieldSpec:
    """One payload field: wire name, value type tag, required or optional."""

    name: str
    type: str  # string | number | boolean | point | size | graph | string-list | marker-list
    required: bool = True


@dataclass(frozen=True)
class ActionSpec:
    kind: str
    locality: str
    fields: tuple[FieldSpec, ...] = ()


def _spec(kind: str, locality: str, *fields: FieldSpec) -> ActionSpec:
    return ActionSpec(kind, locality, fields)


#: The fixed core vocabulary. Client-local interaction kinds (zoom, pan) are
#: registered so the endpoint can classify them, but they never reach dispatch.
BUILTIN_ACTIONS: tuple[ActionSpec, ...] = (
    _spec("requestModel", SERVER_BOUND, FieldSpec("modelUri", "string", required=False)),
    _spec("setModel", SERVER_TO_CLIENT, FieldSpec("model", "graph")),
    _spec("updateModel", SERVER_TO_CLIENT, FieldSpec("model", "graph")),
    _spec("createNode", SERVER_BOUND, FieldSpec("elementKind", "string"), FieldSpec("position", "point")),
    _spec("createEdge", SERVER_BOUND, FieldSpec("sourceId", "string"), FieldSpec("targetId", "string")),
    _spec("deleteElements", SERVER_BOUND, FieldSpec("elementIds", "string-list")),
    _spec(
        "changeBounds",
        SERVER_BOUND,
        FieldSpec("elementId", "string"),
        FieldSpec("position", "point"),
        FieldSpec("size", "size"),
    ),
    _spec("applyLabelEdit", SERVER_BOUND, FieldSpec("elementId", "string"), FieldSpec("text", "string")),
    _spec("requestValidation", SERVER_BOUND),
    _spec("setMarkers", SERVER_TO_CLIENT, FieldSpec("markers", "marker-list")),
    _spec("requestValidTargets", SERVER_BOUND, FieldSpec("sourceId", "string")),
    _spec("setValidTargets", SERVER_TO_CLIENT, FieldSpec("ids", "string-list")),
    _spec("undo", SERVER_BOUND),
    _spec("redo", SERVER_BOUND),
    _spec("saveModel", SERVER_BOUND),
    _spec("setDirtyState", SERVER_TO_CLIENT, FieldSpec("dirty", "boolean")),
    _spec("error", SERVER_TO_CLIENT, FieldSpec("message", "string")),
    _spec("zoom", CLIENT_LOCAL, FieldSpec("factor", "number")),
    _spec("pan", CLIENT_LOCAL, FieldSpec("dx", "number"), FieldSpec("dy", "number")),
)

BUILTIN_KINDS = tuple(s.kind for s in BUILTIN_ACTIONS)


class ActionRegistry:
    """Known action kinds with locality and payload schema.

    Built-in kinds are always present. Custom kinds may be added until the
    registry is frozen by a serving endpoint.
    """

    def __init__(self) -> None:
        self._specs: dict[str, ActionSpec] = {s.kind: s for s in BUILTIN_ACTIONS}
        self._frozen = False

    def register(self, kind: str, locality: str, fields: tuple[FieldSpec, ...] = ()) -> None:
        if self._frozen:
            raise RegistryFrozen()
        if kind in self._specs:
            raise DuplicateKind(kind)
        if not kind:
            raise SchemaViolation("kind", "kind must be non-empty")
        if locality not in (CLIENT_LOCAL, SERVER_BOUND, SERVER_TO_CLIENT):
            raise SchemaViolation("locality", f"unknown locality {locality!r}")
        self._specs[kind] = ActionSpec(kind, locality, tuple(fields))

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    def spec(self, kind: str) -> ActionSpec:
        try:
            return self._specs[kind]
        except KeyError:
            raise UnregisteredKind(kind) from None

    def __contains__(self, kind: str) -> bool:
        return kind in self._specs

    def kinds(self) -> tuple[str, ...]:
        return tuple(self._specs)

    def kinds_with_locality(self, locality: str) -> tuple[str, ...]:
        return tuple(k for k, s in self._specs.items() if s.locality == locality)


def register_custom_action(
    registry: ActionRegistry, kind: str, locality: str, fields: tuple[FieldSpec, ...] = ()
) -> ActionRegistry:
    """Register one custom kind; returns the registry for chaining."""
    registry.register(kind, locality, fields)
    return registry


def locality_of(kind: str, registry: ActionRegistry) -> str:
    return registry.spec(kind).locality


# ---------------------------------------------------------------------------
# Payload field encoding/decoding
# ---------------------------------------------------------------------------


def _check_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaViolation(path, "expected a string")
    try:
        value.encode("utf-8")
    except UnicodeEncodeError:
        raise SchemaViolation(path, "string contains unpaired surrogates") from None
    return value


def _check_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation(path, "expected a number")
    if not math.isfinite(value):
        raise SchemaViolation(path, "number must be finite")
    return value


def _encode_field(spec: FieldSpec, value: Any, path: str) -> Any:
    t = spec.type
    if t == "string":
        return _check_str(value, path)
    if t == "number":
        return _check_number(value, path)
    if t == "boolean":
        if not isinstance(value, bool):
            raise SchemaViolation(path, "expected a boolean")
        return value
    if t == "point":
        if not isinstance(value, Point):
            raise SchemaViolation(path, "expected a point")
        return {"x": _check_number(value.x, f"{path}.x"), "y": _check_number(value.y, f"{path}.y")}
    if t == "size":
        if not isinstance(value, Size):
            raise SchemaViolation(path, "expected a size")
        return {
            "width": _check_number(value.width, f"{path}.width"),
            "height": _check_number(value.height, f"{path}.height"),
        }
    if t == "graph":
        if not isinstance(value, GGraph):
            raise SchemaViolation(path, "expected a graph")
        return element_to_json(value)
    if t == "string-list":
        if not isinstance(value, (list, tuple)):
            raise SchemaViolation(path, "expected an array of strings")
        return [_check_str(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if t == "marker-list":
        if not isinstance(value, (list, tuple)) or not all(isinstance(m, Marker) for m in value):
            raise SchemaViolation(path, "expected an array of markers")
        out = []
        for i, m in enumerate(value):
            if m.severity not in SEVERITIES:
                raise SchemaViolation(f"{path}[{i}].severity", f"unknown severity {m.severity!r}")
            out.append(
                {
                    "elementId": _check_str(m.element_id, f"{path}[{i}].elementId"),
                    "severity": m.severity,
                    "message": _check_str(m.message, f"{path}[{i}].message"),
                }
            )
        return out
    raise SchemaViolation(path, f"unknown field type {t!r}")


def _decode_field(spec: FieldSpec, value: Any, path: str) -> Any:
    t = spec.type
    if t == "string":
        return _check_str(value, path)
    if t == "number":
        return _check_number(value, path)
    if t == "boolean":
        if not isinstance(value, bool):
            raise SchemaViolation(path, "expected a boolean")
        return value
    if t == "point":
        if not isinstance(value, dict) or set(value) != {"x", "y"}:
            raise SchemaViolation(path, "expected an object with keys x, y")
        return Point(_check_number(value["x"], f"{path}.x"), _check_number(value["y"], f"{path}.y"))
    if t == "size":
        if not isinstance(value, dict) or set(value) != {"width", "height"}:
            raise SchemaViolation(path, "expected an object with keys width, height")
        return Size(
            _check_number(value["width"], f"{path}.width"),
            _check_number(value["height"], f"{path}.height"),
        )
    if t == "graph":
        try:
            return graph_from_json(value, path)
        except ModelJsonError as exc:
            raise SchemaViolation(exc.field, str(exc)) from None
    if t == "string-list":
        if not isinstance(value, list):
            raise SchemaViolation(path, "expected an array of strings")
        return tuple(_check_str(v, f"{path}[{i}]") for i, v in enumerate(value))
    if t == "marker-list":
        if not isinstance(value, list):
            raise SchemaViolation(path, "expected an array of markers")
        markers = []
        for i, m in enumerate(value):
            if not isinstance(m, dict) or set(m) != {"elementId", "severity", "message"}:
                raise SchemaViolation(f"{path}[{i}]", "expected keys elementId, severity, message")
            severity = m["severity"]
            if severity not in SEVERITIES:
                raise SchemaViolation(f"{path}[{i}].severity", f"unknown severity {severity!r}")
            markers.append(
                Marker(
                    _check_str(m["elementId"], f"{path}[{i}].elementId"),
                    severity,
                    _check_str(m["message"], f"{path}[{i}].message"),
                )
            )
        return tuple(markers)
    raise SchemaViolation(path, f"unknown field type {t!r}")


# ---------------------------------------------------------------------------
# Wire framing
# ---------------------------------------------------------------------------


def encode_action(action: Action, registry: ActionRegistry) -> dict[str, Any]:
    """Action as a canonical JSON object (kind first, fields in schema order)."""
    spec = registry.spec(action.kind)
    doc: dict[str, Any] = {"kind": action.kind}
    known = {f.name for f in spec.fields}
    for key in action.payload:
        if key not in known:
            raise SchemaViolation(f"action.{key}", "field not in schema")
    for f in spec.fields:
        if f.name not in action.payload:
            if f.required:
                raise SchemaViolation(f"action.{f.name}", "missing required field")
            continue
        doc[f.name] = _encode_field(f, action.payload[f.name], f"action.{f.name}")
    return doc


def encode_message(message: ActionMessage, registry: ActionRegistry) -> bytes:
    """Canonical JSON-RPC notification bytes for one action message."""
    _check_str(message.client_id, "clientId")
    doc = {
        "jsonrpc": "2.0",
        "method": METHOD,
        "params": {
            "clientId": message.client_id,
            "action": encode_action(message.action, registry),
        },
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf-8")


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite constant {name} is not valid JSON")


def decode_action(obj: Any, registry: ActionRegistry, path: str = "action") -> Action:
    if not isinstance(obj, dict):
        raise SchemaViolation(path, "expected an object")
    kind = obj.get("kind")
    if not isinstance(kind, str) or not kind:
        raise SchemaViolation(f"{path}.kind", "expected a non-empty string")
    spec = registry.spec(kind)
    by_name = {f.name: f for f in spec.fields}
    payload: dict[str, Any] = {}
    for key, value in obj.items():
        if key == "kind":
            continue
        f = by_name.get(key)
        if f is None:
            raise SchemaViolation(f"{path}.{key}", "field not in schema")
        payload[key] = _decode_field(f, value, f"{path}.{key}")
    for f in spec.fields:
        if f.required and f.name not in payload:
            raise SchemaViolation(f"{path}.{f.name}", "missing required field")
    return Action(kind, payload)


def decode_message(data: bytes | str, registry: ActionRegistry) -> ActionMessage:
    """Parse and validate one wire message.

    Raises exactly one of MalformedJson, WrongMethod, UnregisteredKind or
    SchemaViolation, never anything else, for arbitrary input bytes.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJson(f"invalid utf-8: {exc}") from None
    else:
        text = data
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except (ValueError, RecursionError) as exc:
        raise MalformedJson(str(exc)) from None

    if not isinstance(doc, dict):
        raise SchemaViolation("message", "expected a JSON object")
    for key in doc:
        if key not in ("jsonrpc", "method", "params"):
            raise SchemaViolation(key, "unknown envelope field")
    if doc.get("jsonrpc") != "2.0":
        raise SchemaViolation("jsonrpc", "expected the string \"2.0\"")
    method = doc.get("method")
    if not isinstance(method, str):
        raise SchemaViolation("method", "expected a string")
    if method != METHOD:
        raise WrongMethod(f"expected method {METHOD!r}, got {method!r}")
    params = doc.get("params")
    if not isinstance(params, dict):
        raise SchemaViolation("params", "expected an object")
    for key in params:
        if key not in ("clientId", "action"):
            raise SchemaViolation(f"params.{key}", "unknown field")
    client_id = params.get("clientId")
    if not isinstance(client_id, str):
        raise SchemaViolation("params.clientId", "expected a string")
    _check_str(client_id, "params.clientId")
    action = decode_action(params.get("action"), registry, "params.action")
    return ActionMessage(client_id, action)


# ---------------------------------------------------------------------------
# Convenience constructors for the built-in vocabulary
# ---------------------------------------------------------------------------


def request_model(model_uri: Optional[str] = None) -> Action:
    payload = {} if model_uri is None else {"modelUri": model_uri}
    return Action("requestModel", payload)


def set_model(graph: GGraph) -> Action:
    return Action("setModel", {"model": graph})


def update_model(graph: GGraph) -> Action:
    return Action("updateModel", {"model": graph})


def create_node(element_kind: str, position: Point) -> Action:
    return Action("createNode", {"elementKind": element_kind, "position": position})


def create_edge(source_id: str, target_id: str) -> Action:
    return Action("createEdge", {"sourceId": source_id, "targetId": target_id})


def delete_elements(element_ids: tuple[str, ...]) -> Action:
    return Action("deleteElements", {"elementIds": tuple(element_ids)})


def change_bounds(element_id: str, position: Point, size: Size) -> Action:
    return Action("changeBounds", {"elementId": element_id, "position": position, "size": size})


def apply_label_edit(element_id: str, text: str) -> Action:
    return Action("applyLabelEdit", {"elementId": element_id, "text": text})


def request_validation() -> Action:
    return Action("requestValidation")


def set_markers(markers: tuple[Marker, ...]) -> Action:
    return Action("setMarkers", {"markers": tuple(markers)})


def request_valid_targets(source_id: str) -> Action:
    return Action("requestValidTargets", {"sourceId": source_id})


def set_valid_targets(ids: tuple[str, ...]) -> Action:
    return Action("setValidTargets", {"ids": tuple(ids)})


def undo() -> Action:
    return Action("undo")


def redo() -> Action:
    return Action("redo")


def save_model() -> Action:
    return Action("saveModel")


def set_dirty_state(dirty: bool) -> Action:
    return Action("setDirtyState", {"dirty": dirty})


def error(message: str) -> Action:
    return Action("error", {"message": message})
