"""Predicate semantics: hard components over subdomain boxes and the
truth-factor provider interface.

A hard component decides, by interval reasoning over a box of candidate
values, whether a predicate is certainly violated everywhere in the box
(Blocked) or satisfiable by at least one point assignment (Possible).
Because the spatial conditions are monotone in each coordinate, checking
the extreme corner of the box makes the verdict exact, not just sound.

Providers turn (predicate, attribute, box, context) into truth factors:
non-negative weights over a node's child subdomains that sum to one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .statement import PRED_SPECS, Pair


class ConfigError(ValueError):
    pass


class HardVerdict(Enum):
    BLOCKED = 0
    POSSIBLE = 1


def _half(w: int) -> int:
    # ceil(w / 2); keeps blocking conservative on integer pixel grids
    return (w + 1) // 2


def hard_check(name: str, args: tuple[str, ...], box) -> HardVerdict:
    """Hard-component verdict for a predicate over a subdomain box.

    `box` maps (entity id, attribute) -> (lo, hi).  Blocked means every
    integer point in the box violates the objective condition.  Image y
    grows downward, so `above` means smaller y.
    """
    if name == "category":
        return HardVerdict.POSSIBLE
    a, b = args
    try:
        if name == "leftof":
            # satisfiable iff min(a.x) < max(b.x) - half(min(b.w))
            ok = box[(a, "x")][0] < box[(b, "x")][1] - _half(box[(b, "w")][0])
        elif name == "rightof":
            ok = box[(a, "x")][1] > box[(b, "x")][0] + _half(box[(b, "w")][0])
        elif name == "above":
            ok = box[(a, "y")][0] < box[(b, "y")][1] - _half(box[(b, "h")][0])
        elif name == "below":
            ok = box[(a, "y")][1] > box[(b, "y")][0] + _half(box[(b, "h")][0])
        else:
            raise ConfigError(f"unknown predicate type {name!r}")
    except KeyError as e:
        raise ConfigError(f"box is missing interval for {e.args[0]}") from None
    return HardVerdict.POSSIBLE if ok else HardVerdict.BLOCKED


def holds_pointwise(name: str, args: tuple[str, ...], values) -> bool:
    """Bivalent check of the objective condition at a single grounding.

    `values` maps (entity id, attribute) -> int.  Category has no hard
    component and always holds.
    """
    box = {k: (v, v) for k, v in values.items()}
    return hard_check(name, args, box) is HardVerdict.POSSIBLE


def block_and_renormalize(factors, blocked):
    """Zero blocked entries and rescale the survivors to sum to one.

    Returns None when no truth mass survives (every child blocked, or the
    surviving factors are all zero); the caller treats the parent edge as
    having zero truth.  Ratios among surviving entries are preserved.
    """
    if len(factors) != len(blocked):
        raise ValueError("factor vector and blocked mask differ in length")
    total = 0.0
    for f, b in zip(factors, blocked):
        if not b:
            total += f
    if total <= 0.0:
        return None
    return tuple(0.0 if b else f / total for f, b in zip(factors, blocked))


# ---------------------------------------------------------------------------
# Providers


@dataclass(frozen=True)
class SubdomainBox:
    """Intervals for every attribute in a predicate's scope, plus the node
    currently under refinement (`focus` pair and its tree path)."""

    intervals: dict
    focus: Pair | None = None
    path: tuple[int, ...] = ()

    def interval(self, entity: str, attr: str) -> tuple[int, int]:
        return self.intervals[(entity, attr)]


class TruthFactorProvider:
    """Produces truth factors for (predicate, attribute, box, context).

    Implementations must be deterministic given identical inputs and
    read-only after construction so they can be shared across concurrent
    inference calls.
    """

    needs_context: bool = False

    def factors(self, pred_name: str, args: tuple[str, ...], attr: str, box: SubdomainBox, ctx):
        raise NotImplementedError


def provide_factors(provider, pred_name, args, attr, box: SubdomainBox, ctx=None):
    """Fetch and sanity-check a provider's factors for one node."""
    if attr not in PRED_SPECS[pred_name][1]:
        raise ConfigError(f"attribute {attr!r} does not affect predicate {pred_name!r}")
    out = tuple(float(f) for f in provider.factors(pred_name, args, attr, box, ctx))
    if not out:
        raise ConfigError(f"provider returned no factors for {pred_name}/{attr}")
    if any(f < 0.0 or f > 1.0 for f in out):
        raise ConfigError(f"factors outside [0, 1] for {pred_name}/{attr}: {out}")
    if abs(sum(out) - 1.0) > 1e-9:
        raise ConfigError(f"factors do not sum to 1 for {pred_name}/{attr}: {out}")
    return out


class UniformProvider(TruthFactorProvider):
    """Uninformative prior: equal mass on every child."""

    def __init__(self, k: int = 2):
        self.k = k

    def factors(self, pred_name, args, attr, box, ctx):
        return (1.0 / self.k,) * self.k


class TabularProvider(TruthFactorProvider):
    """Factors stored per (predicate type, attribute, node path).

    Context-free by design, which is what makes hand-built fixtures exactly
    reproducible.  Loaded either from records in memory or from a JSON
    document of {"pred", "attr", "path", "factors"} records.
    """

    def __init__(self, records):
        self.table = {}
        for rec in records:
            key = (rec["pred"], rec["attr"], tuple(rec["path"]))
            factors = tuple(float(f) for f in rec["factors"])
            if key in self.table and self.table[key] != factors:
                raise ConfigError(f"conflicting factor records for {key}")
            self.table[key] = factors

    def factors(self, pred_name, args, attr, box, ctx):
        key = (pred_name, attr, box.path)
        try:
            return self.table[key]
        except KeyError:
            raise ConfigError(
                f"no stored factors for predicate {pred_name!r}, attribute {attr!r}, path {list(box.path)}"
            ) from None

    def to_records(self):
        return [
            {"pred": p, "attr": a, "path": list(path), "factors": list(f)}
            for (p, a, path), f in sorted(self.table.items())
        ]

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if isinstance(doc, dict):
            records = doc.get("records", [])
        else:
            records = doc
        return cls(records)

    def save(self, path):
        doc = {"provider": "tabular", "records": self.to_records()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
