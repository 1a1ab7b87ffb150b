"""Graphical model: the typed, attributed graph shared between client and server.

Elements form a containment tree rooted at a :class:`GGraph`. Every element
carries an opaque id (unique within the tree), a dotted type string such as
``node:task:manual``, an ordered list of children, optional CSS classes and a
flat map of scalar arguments. Nodes add position/size on a 2D plane with y
growing downward; edges reference source and target nodes by id.

Trees are immutable values: all editing builds new trees. The canonical JSON
encoding used on the wire and in fixtures is produced by :func:`element_to_json`
(keys in declaration order, empty optional fields omitted, ``children`` always
present).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Optional, Union

Scalar = Union[str, int, float, bool]

#: First segment of the dotted type string must be one of these.
BASE_KINDS = frozenset({"graph", "node", "edge", "label", "compartment"})


class ModelJsonError(ValueError):
    """Raised when a JSON document does not describe a well-formed element tree.

    ``field`` is the dotted path of the offending JSON field.
    """

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class Size:
    width: float
    height: float


@dataclass(frozen=True)
class Bounds:
    x: float
    y: float
    width: float
    height: float


@dataclass(frozen=True, kw_only=True)
class GElement:
    """Base element of the graphical model tree."""

    id: str
    type: str
    children: tuple["GElement", ...] = ()
    css_classes: tuple[str, ...] = ()
    args: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True, kw_only=True)
class GNode(GElement):
    position: Point = Point(0.0, 0.0)
    size: Size = Size(1.0, 1.0)


@dataclass(frozen=True, kw_only=True)
class GEdge(GElement):
    source_id: str
    target_id: str
    routing_points: tuple[Point, ...] = ()


@dataclass(frozen=True, kw_only=True)
class GGraph(GElement):
    #: Bumped by exactly one for every model delivery to a client.
    revision: int = 0


@dataclass(frozen=True)
class StructuralDiagnostic:
    """One violated tree invariant; diagnostics are data, not failures."""

    code: str
    element_id: str
    message: str


def _iter_tree(root: GElement) -> Iterator[GElement]:
    """Depth-first preorder over the containment tree."""
    stack = [root]
    while stack:
        el = stack.pop()
        yield el
        stack.extend(reversed(el.children))


def iter_elements(root: GElement) -> Iterator[GElement]:
    return _iter_tree(root)


def find_element(root: GElement, element_id: str) -> Optional[GElement]:
    """First element with the given id in depth-first preorder, or None."""
    for el in _iter_tree(root):
        if el.id == element_id:
            return el
    return None


def bounds_of(node: GNode) -> Bounds:
    return Bounds(node.position.x, node.position.y, node.size.width, node.size.height)


def _finite(*values: float) -> bool:
    return all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in values)


def validate_tree(root: GElement, known_types: Optional[frozenset[str]] = None) -> list[StructuralDiagnostic]:
    """Check every element invariant of the tree.

    Returns one diagnostic per violation; an empty list means the tree is
    well-formed. When ``known_types`` is given, every dotted type must appear
    in it exactly; otherwise only the base segment is checked.
    """
    diagnostics: list[StructuralDiagnostic] = []
    seen_ids: set[str] = set()
    flagged_dupes: set[str] = set()
    node_ids: set[str] = set()

    elements = list(_iter_tree(root))
    for el in elements:
        if isinstance(el, GNode):
            node_ids.add(el.id)

    for el in elements:
        if not el.id:
            diagnostics.append(StructuralDiagnostic("empty-id", el.id, "element id must be non-empty"))
        elif el.id in seen_ids:
            if el.id not in flagged_dupes:
                diagnostics.append(
                    StructuralDiagnostic("duplicate-id", el.id, f"id {el.id!r} occurs more than once")
                )
                flagged_dupes.add(el.id)
        else:
            seen_ids.add(el.id)

        base = el.type.split(":", 1)[0] if el.type else ""
        if not el.type or base not in BASE_KINDS or (known_types is not None and el.type not in known_types):
            diagnostics.append(
                StructuralDiagnostic("unknown-type", el.id, f"type {el.type!r} is not registered")
            )

        if isinstance(el, GNode):
            if not _finite(el.position.x, el.position.y):
                diagnostics.append(
                    StructuralDiagnostic("invalid-position", el.id, "position must be finite")
                )
            if not _finite(el.size.width, el.size.height) or el.size.width <= 0 or el.size.height <= 0:
                diagnostics.append(
                    StructuralDiagnostic("invalid-size", el.id, "size must be strictly positive")
                )

        if isinstance(el, GEdge):
            for which, ref in (("source", el.source_id), ("target", el.target_id)):
                if ref not in node_ids:
                    diagnostics.append(
                        StructuralDiagnostic(
                            "dangling-endpoint", el.id, f"{which} {ref!r} does not resolve to a node"
                        )
                    )

    return diagnostics


# ---------------------------------------------------------------------------
# Canonical JSON encoding
#
# Key order follows field declaration order: id, type, children, cssClasses,
# args, then the subtype fields. cssClasses / args / routingPoints are omitted
# when empty; children is always present. `args` keys are sorted so the
# encoding of a tree is a pure function of its value.
# ---------------------------------------------------------------------------


def _point_to_json(p: Point) -> dict[str, Any]:
    return {"x": p.x, "y": p.y}


def element_to_json(el: GElement) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "id": el.id,
        "type": el.type,
        "children": [element_to_json(c) for c in el.children],
    }
    if el.css_classes:
        doc["cssClasses"] = list(el.css_classes)
    if el.args:
        doc["args"] = {k: el.args[k] for k in sorted(el.args)}
    if isinstance(el, GNode):
        doc["position"] = _point_to_json(el.position)
        doc["size"] = {"width": el.size.width, "height": el.size.height}
    elif isinstance(el, GEdge):
        doc["sourceId"] = el.source_id
        doc["targetId"] = el.target_id
        if el.routing_points:
            doc["routingPoints"] = [_point_to_json(p) for p in el.routing_points]
    elif isinstance(el, GGraph):
        doc["revision"] = el.revision
    return doc


def _require_str(obj: Mapping[str, Any], key: str, path: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ModelJsonError(f"{path}.{key}", "expected a string")
    _check_encodable(value, f"{path}.{key}")
    return value


def _check_encodable(s: str, path: str) -> None:
    try:
        s.encode("utf-8")
    except UnicodeEncodeError:
        raise ModelJsonError(path, "string contains unpaired surrogates") from None


def _require_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelJsonError(path, "expected a number")
    if not math.isfinite(value):
        raise ModelJsonError(path, "number must be finite")
    return value


def _point_from_json(obj: Any, path: str) -> Point:
    if not isinstance(obj, dict) or set(obj) != {"x", "y"}:
        raise ModelJsonError(path, "expected an object with keys x, y")
    return Point(_require_number(obj["x"], f"{path}.x"), _require_number(obj["y"], f"{path}.y"))


_COMMON_KEYS = {"id", "type", "children", "cssClasses", "args"}
_EXTRA_KEYS = {"node": {"position", "size"}, "edge": {"sourceId", "targetId", "routingPoints"}, "graph": {"revision"}}


def element_from_json(obj: Any, path: str = "element") -> GElement:
    """Decode one element (and its subtree); raises :class:`ModelJsonError`."""
    if not isinstance(obj, dict):
        raise ModelJsonError(path, "expected an object")

    element_id = _require_str(obj, "id", path)
    type_str = _require_str(obj, "type", path)
    base = type_str.split(":", 1)[0]

    allowed = _COMMON_KEYS | _EXTRA_KEYS.get(base, set())
    for key in obj:
        if key not in allowed:
            raise ModelJsonError(f"{path}.{key}", "unknown field")

    raw_children = obj.get("children")
    if not isinstance(raw_children, list):
        raise ModelJsonError(f"{path}.children", "children must always be present as an array")
    children = tuple(
        element_from_json(c, f"{path}.children[{i}]") for i, c in enumerate(raw_children)
    )

    css_raw = obj.get("cssClasses", [])
    if not isinstance(css_raw, list) or not all(isinstance(c, str) for c in css_raw):
        raise ModelJsonError(f"{path}.cssClasses", "expected an array of strings")
    for c in css_raw:
        _check_encodable(c, f"{path}.cssClasses")
    css = tuple(css_raw)

    args_raw = obj.get("args", {})
    if not isinstance(args_raw, dict):
        raise ModelJsonError(f"{path}.args", "expected an object of scalars")
    args: dict[str, Scalar] = {}
    for k, v in args_raw.items():
        _check_encodable(k, f"{path}.args")
        if isinstance(v, bool) or isinstance(v, (int, float)):
            if not isinstance(v, bool) and not math.isfinite(v):
                raise ModelJsonError(f"{path}.args.{k}", "number must be finite")
        elif isinstance(v, str):
            _check_encodable(v, f"{path}.args.{k}")
        else:
            raise ModelJsonError(f"{path}.args.{k}", "args values must be scalars")
        args[k] = v

    common = dict(id=element_id, type=type_str, children=children, css_classes=css, args=args)

    if base == "node":
        if "position" not in obj:
            raise ModelJsonError(f"{path}.position", "missing field")
        if "size" not in obj:
            raise ModelJsonError(f"{path}.size", "missing field")
        size_obj = obj["size"]
        if not isinstance(size_obj, dict) or set(size_obj) != {"width", "height"}:
            raise ModelJsonError(f"{path}.size", "expected an object with keys width, height")
        return GNode(
            position=_point_from_json(obj["position"], f"{path}.position"),
            size=Size(
                _require_number(size_obj["width"], f"{path}.size.width"),
                _require_number(size_obj["height"], f"{path}.size.height"),
            ),
            **common,
        )
    if base == "edge":
        points_raw = obj.get("routingPoints", [])
        if not isinstance(points_raw, list):
            raise ModelJsonError(f"{path}.routingPoints", "expected an array of points")
        return GEdge(
            source_id=_require_str(obj, "sourceId", path),
            target_id=_require_str(obj, "targetId", path),
            routing_points=tuple(
                _point_from_json(p, f"{path}.routingPoints[{i}]") for i, p in enumerate(points_raw)
            ),
            **common,
        )
    if base == "graph":
        revision = obj.get("revision")
        if isinstance(revision, bool) or not isinstance(revision, int):
            raise ModelJsonError(f"{path}.revision", "expected an integer")
        if revision < 0:
            raise ModelJsonError(f"{path}.revision", "revision must be non-negative")
        return GGraph(revision=revision, **common)
    return GElement(**common)


def graph_from_json(obj: Any, path: str = "model") -> GGraph:
    el = element_from_json(obj, path)
    if not isinstance(el, GGraph):
        raise ModelJsonError(path, "expected a graph element at the root")
    return el
