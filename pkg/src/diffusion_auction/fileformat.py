"""Network files, outcome reports and DOT export.

A network file is JSON with a schema tag, one buyer record per line::

    {
      "schema": "diffusion-auction/network@1",
      "items": 5,
      "seller_neighbors": [1, 2, 3],
      "buyers": [
        {"id": 1, "label": "A", "valuation": "7", "neighbors": [4]},
        ...
      ],
      "actions": [
        {"id": 1, "valuation": "7", "invited": [4]},
        {"id": 9, "nil": true}
      ]
    }

Valuations are decimal strings (or ``p/q``) parsed exactly into ``int`` or
``Fraction``. Buyer neighbour lists name buyers only; adjacency to the seller
comes from ``seller_neighbors``. ``actions`` is optional; when absent the
truthful profile is used, and buyers missing from it are nil.
"""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any, Dict, Mapping, Optional, Tuple

from .network import SELLER, Action, ActionProfile, BuyerType, Network, NetworkError, Report

SCHEMA = "diffusion-auction/network@1"
REPORT_SCHEMA = "diffusion-auction/outcome@1"


class ParseError(ValueError):
    def __init__(self, message: str, location: str):
        super().__init__(f"{location}: {message}")
        self.location = location


def parse_value(text: Any, location: str = "value", exact: bool = True):
    if isinstance(text, bool):
        raise ParseError("expected a number", location)
    if isinstance(text, int):
        v = text
    elif isinstance(text, float):
        v = Fraction(str(text))
    elif isinstance(text, str):
        try:
            v = Fraction(text.strip())
        except (ValueError, ZeroDivisionError):
            raise ParseError(f"not a number: {text!r}", location) from None
    else:
        raise ParseError("expected a number or decimal string", location)
    if v < 0:
        raise ParseError("valuations must be non-negative", location)
    if not exact:
        return float(v)
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


def format_value(v) -> str:
    """Exact text for a value: integers plainly, terminating fractions as decimals, else p/q."""
    if isinstance(v, bool):
        v = int(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    v = Fraction(v)
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{v.numerator}/{v.denominator}"
    places = max(twos, fives)
    scaled = v * 10 ** places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def _ids(raw, location) -> list:
    if not isinstance(raw, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in raw):
        raise ParseError("expected a list of integer ids", location)
    return raw


def loads(text: str, exact: bool = True) -> Tuple[Network, Optional[ActionProfile]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return from_document(doc, exact)


def from_document(doc: Mapping, exact: bool = True) -> Tuple[Network, Optional[ActionProfile]]:
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object", "$")
    if doc.get("schema") != SCHEMA:
        raise ParseError(f"unsupported schema {doc.get('schema')!r}, expected {SCHEMA!r}", "$.schema")
    items = doc.get("items", 1)
    if not isinstance(items, int) or isinstance(items, bool) or items < 1:
        raise ParseError("items must be a positive integer", "$.items")
    seller = _ids(doc.get("seller_neighbors", []), "$.seller_neighbors")
    raw_buyers = doc.get("buyers")
    if not isinstance(raw_buyers, list):
        raise ParseError("expected a list of buyer records", "$.buyers")
    vals, nbrs, labels = {}, {}, {}
    for k, rec in enumerate(raw_buyers):
        loc = f"$.buyers[{k}]"
        if not isinstance(rec, dict):
            raise ParseError("expected an object", loc)
        i = rec.get("id")
        if not isinstance(i, int) or isinstance(i, bool) or i < 0:
            raise ParseError("id must be a non-negative integer", f"{loc}.id")
        if i in vals:
            raise ParseError(f"duplicate buyer id {i}", f"{loc}.id")
        if "valuation" not in rec:
            raise ParseError("missing valuation", f"{loc}.valuation")
        vals[i] = parse_value(rec["valuation"], f"{loc}.valuation", exact)
        nbrs[i] = _ids(rec.get("neighbors", []), f"{loc}.neighbors")
        if "label" in rec:
            labels[i] = str(rec["label"])
    sellers = set(seller)
    try:
        buyers = {i: BuyerType(vals[i], frozenset(nbrs[i]) | ({SELLER} if i in sellers else set()))
                  for i in vals}
        net = Network(frozenset(sellers), buyers, items, labels)
    except NetworkError as exc:
        raise ParseError(str(exc), "$.buyers") from None
    profile = None
    if "actions" in doc:
        raw = doc["actions"]
        if not isinstance(raw, list):
            raise ParseError("expected a list of action records", "$.actions")
        profile = {i: None for i in net.buyers}
        for k, rec in enumerate(raw):
            loc = f"$.actions[{k}]"
            i = rec.get("id") if isinstance(rec, dict) else None
            if i not in net.buyers:
                raise ParseError(f"unknown buyer {i!r}", f"{loc}.id")
            if rec.get("nil"):
                profile[i] = None
                continue
            v = parse_value(rec.get("valuation"), f"{loc}.valuation", exact)
            invited = _ids(rec.get("invited", []), f"{loc}.invited")
            profile[i] = Report(v, frozenset(invited))
    return net, profile


def load(path, exact: bool = True):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), exact)


def _line(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def dumps(net: Network, profile: Optional[Mapping[int, Action]] = None) -> str:
    lines = ["{", f'  "schema": {json.dumps(SCHEMA)},', f'  "items": {net.item_count},',
             f'  "seller_neighbors": {_line(sorted(net.seller_neighbors))},', '  "buyers": [']
    recs = []
    for i, t in net.buyers.items():
        rec = {"id": i}
        if i in net.labels:
            rec["label"] = net.labels[i]
        rec["valuation"] = format_value(t.valuation)
        rec["neighbors"] = sorted(net.buyer_neighbors(i))
        recs.append("    " + _line(rec))
    lines.append(",\n".join(recs))
    if profile is None:
        lines.append("  ]")
    else:
        lines.append("  ],")
        lines.append('  "actions": [')
        recs = []
        for i in net.buyers:
            a = profile.get(i)
            if a is None:
                rec = {"id": i, "nil": True}
            else:
                rec = {"id": i, "valuation": format_value(a.value),
                       "invited": sorted(j for j in a.invited if j != SELLER)}
            recs.append("    " + _line(rec))
        lines.append(",\n".join(recs))
        lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def digest(net: Network, profile: Optional[Mapping[int, Action]] = None) -> str:
    return hashlib.sha256(dumps(net, profile).encode()).hexdigest()[:16]


# ------------------------------------------------------------------- reports


def outcome_rows(net: Network, outcome, truthful: bool) -> list:
    rows = []
    for i in net.buyers:
        row = {"id": i, "label": net.label(i), "item": outcome.item.get(i, 0),
               "payment": format_value(outcome.payment.get(i, 0))}
        if truthful:
            row["utility"] = format_value(outcome.utility(i, net.valuation(i)))
        rows.append(row)
    return rows


def outcome_document(net: Network, outcome, input_digest: str, truthful: bool,
                     with_trace: bool = False, metadata: Optional[Dict] = None) -> dict:
    doc = {
        "schema": REPORT_SCHEMA,
        "mechanism": outcome.mechanism,
        "items": outcome.k,
        "input": input_digest,
        "rows": outcome_rows(net, outcome, truthful),
        "revenue": format_value(outcome.revenue),
        "welfare": format_value(outcome.welfare),
    }
    if with_trace:
        doc["trace"] = [_label_event(net, e) for e in outcome.trace]
    if metadata:
        doc["metadata"] = metadata
    return doc


def _label_event(net, event):
    out = {}
    for key, val in event.items():
        if key in ("buyer", "from", "to"):
            out[key] = net.label(val)
        elif isinstance(val, list):
            out[key] = [net.label(x) for x in val]
        else:
            out[key] = val
    return out


def render_text(doc: dict) -> str:
    lines = [f"mechanism: {doc['mechanism']}", f"items: {doc['items']}", f"input: {doc['input']}", ""]
    has_u = any("utility" in r for r in doc["rows"])
    header = f"{'id':>6} {'label':>6} {'item':>5} {'payment':>10}" + (f" {'utility':>10}" if has_u else "")
    lines.append(header)
    for r in doc["rows"]:
        line = f"{r['id']:>6} {r['label']:>6} {r['item']:>5} {r['payment']:>10}"
        if has_u:
            line += f" {r['utility']:>10}"
        lines.append(line)
    lines += ["", f"revenue: {doc['revenue']}", f"welfare: {doc['welfare']}"]
    for e in doc.get("trace", []):
        lines.append("trace: " + " ".join(f"{k}={_fmt_trace(v)}" for k, v in e.items()))
    for key, val in sorted(doc.get("metadata", {}).items()):
        lines.append(f"{key}: {val}")
    return "\n".join(lines) + "\n"


def _fmt_trace(v):
    if isinstance(v, list):
        return "{" + ",".join(str(x) for x in v) + "}"
    return str(v)


def tree_to_dot(net: Network, tree) -> str:
    """The allocation tree as a DOT digraph; node labels read ``id/value/weight``."""
    lines = ["digraph allocation_tree {", '  s [label="s", shape=box];']
    for i in sorted(tree.nodes):
        w = tree.initial_weight.get(i, tree.weight[i])
        shape = "doublecircle" if i in tree.efficient else "circle"
        lines.append(f'  n{i} [label="{net.label(i)}/{format_value(tree.value_of[i])}/{w}", shape={shape}];')
    for i in sorted(tree.nodes):
        p = tree.parent_of[i]
        src = "s" if p == SELLER else f"n{p}"
        lines.append(f"  {src} -> n{i};")
    lines.append("}")
    return "\n".join(lines) + "\n"
