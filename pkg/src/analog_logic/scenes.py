"""Synthetic scenes, fill-in-the-blank tasks, baselines and scoring.

Scenes are box rasters: a fixed pixel frame divided into horizontal bands
(wall, counter, floor), populated with non-overlapping category-labelled
bounding boxes.  Each category has its own band prior and size range, so
a learner can recover where things of a given kind tend to sit and how
big they are.  Tasks hide some objects, keep their boxes as candidate
slots, and ask a solver to map labels back onto slots so that a logic
statement is best satisfied.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .domain_tree import DomainTree
from .predicates import holds_pointwise
from .statement import ATTRS, Context, Entity, parse_statement, validate
from . import inference, neural

CATEGORIES = (
    "chair", "couch", "potted_plant", "bed", "mirror", "dining_table", "desk",
    "microwave", "oven", "toaster", "sink", "refrigerator", "clock", "blender",
)

BANDS = ("wall", "counter", "floor")

# band priors (wall, counter, floor) and size ranges per category, tuned so
# categories are separable by placement and footprint
CATEGORY_PRIORS = {
    "chair":        ((0.05, 0.05, 0.90), (14, 22), (18, 26)),
    "couch":        ((0.01, 0.04, 0.95), (34, 50), (16, 24)),
    "potted_plant": ((0.10, 0.55, 0.35), (8, 14), (12, 20)),
    "bed":          ((0.01, 0.02, 0.97), (40, 56), (20, 28)),
    "mirror":       ((0.90, 0.06, 0.04), (10, 18), (14, 22)),
    "dining_table": ((0.01, 0.04, 0.95), (30, 46), (14, 22)),
    "desk":         ((0.02, 0.08, 0.90), (26, 40), (14, 20)),
    "microwave":    ((0.06, 0.90, 0.04), (12, 18), (8, 12)),
    "oven":         ((0.05, 0.50, 0.45), (16, 24), (16, 24)),
    "toaster":      ((0.04, 0.92, 0.04), (8, 12), (6, 9)),
    "sink":         ((0.03, 0.93, 0.04), (12, 20), (6, 10)),
    "refrigerator": ((0.05, 0.10, 0.85), (18, 26), (34, 48)),
    "clock":        ((0.93, 0.04, 0.03), (8, 12), (8, 12)),
    "blender":      ((0.05, 0.90, 0.05), (6, 10), (10, 14)),
}


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneObject:
    id: str
    category: str
    kind: str = "constant"  # "constant" | "variable"
    box: dict = field(default_factory=dict)       # attr -> int (fixed values only)
    domains: dict = field(default_factory=dict)   # attr -> (lo, hi) overrides for variables


def default_bands(height: int) -> dict:
    third = height // 3
    return {
        "wall": (0, third - 1),
        "counter": (third, 2 * third - 1),
        "floor": (2 * third, height - 1),
    }


class Scene:
    """A pixel frame with bands, objects and an implicit image context."""

    def __init__(self, width: int = 128, height: int = 128, objects=(), bands=None, k: int = 2):
        self.width = width
        self.height = height
        self.k = k
        self.bands = bands if bands is not None else default_bands(height)
        self.objects = list(objects)
        self.entities = {}
        for obj in self.objects:
            if obj.id in self.entities:
                raise SceneError(f"duplicate object id {obj.id!r}")
            self.entities[obj.id] = self._entity(obj)
        self.contexts = {"img": Context("img", "image", self)}

    def _entity(self, obj: SceneObject) -> Entity:
        ranges = neural.attribute_ranges(self.width, self.height)
        attrs = {}
        for a in ATTRS:
            if obj.kind == "constant" or obj.box.get(a) is not None:
                v = obj.box.get(a)
                if v is None:
                    raise SceneError(f"constant object {obj.id!r} is missing attribute {a!r}")
                attrs[a] = int(v)
            else:
                lo, hi = obj.domains.get(a, ranges[a])
                attrs[a] = DomainTree(lo, hi, self.k)
        kind = obj.kind
        if kind == "variable" and all(not isinstance(v, DomainTree) for v in attrs.values()):
            raise SceneError(f"variable object {obj.id!r} has no open attributes")
        return Entity(obj.id, kind, attrs)

    def band_of(self, y: int) -> str:
        for name, (lo, hi) in self.bands.items():
            if lo <= y <= hi:
                return name
        return "floor"

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "k": self.k,
            "bands": {b: list(r) for b, r in self.bands.items()},
            "objects": [
                {
                    "id": o.id,
                    "category": o.category,
                    "kind": o.kind,
                    "box": {a: o.box.get(a) for a in ATTRS},
                    **({"domains": {a: list(r) for a, r in sorted(o.domains.items())}} if o.domains else {}),
                }
                for o in self.objects
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scene":
        objects = [
            SceneObject(
                id=o["id"],
                category=o.get("category", "unknown"),
                kind=o.get("kind", "constant"),
                box={a: v for a, v in (o.get("box") or {}).items() if v is not None},
                domains={a: tuple(r) for a, r in (o.get("domains") or {}).items()},
            )
            for o in doc.get("objects", [])
        ]
        bands = {b: tuple(r) for b, r in doc.get("bands", {}).items()} or None
        return cls(doc.get("width", 128), doc.get("height", 128), objects, bands, doc.get("k", 2))


def load_scene_file(path) -> dict:
    """Load a scene file: the scene plus optional task fields.

    Returns a dict with keys scene, blanks, statement, truth_assignment,
    grounding (each possibly None)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {
        "scene": Scene.from_json(doc),
        "blanks": [(b["id"], {a: int(v) for a, v in b["box"].items()}) for b in doc.get("blanks", [])],
        "statement": doc.get("statement"),
        "truth_assignment": doc.get("truth_assignment"),
        "grounding": None,
    }
    if doc.get("grounding"):
        out["grounding"] = {
            (eid, a): int(v) for eid, vals in doc["grounding"].items() for a, v in vals.items()
        }
    return out


def scene_file_json(scene: Scene, blanks=None, statement=None, truth_assignment=None, grounding=None) -> dict:
    doc = scene.to_json()
    if blanks is not None:
        doc["blanks"] = [{"id": bid, "box": dict(sorted(box.items()))} for bid, box in blanks]
    if statement is not None:
        doc["statement"] = statement
    if truth_assignment is not None:
        doc["truth_assignment"] = dict(sorted(truth_assignment.items()))
    if grounding is not None:
        by_ent = {}
        for (eid, a), v in grounding.items():
            by_ent.setdefault(eid, {})[a] = v
        doc["grounding"] = {e: dict(sorted(vals.items())) for e, vals in sorted(by_ent.items())}
    return doc


# ---------------------------------------------------------------------------
# Generation


@dataclass
class GeneratorConfig:
    width: int = 128
    height: int = 128
    k: int = 2
    n_objects: tuple[int, int] = (3, 6)
    categories: tuple = CATEGORIES
    max_attempts: int = 1000
    distinct_categories: bool = True


def _boxes_overlap(a: dict, b: dict) -> bool:
    ax0 = a["x"] - a["w"] // 2
    ax1 = ax0 + a["w"] - 1
    bx0 = b["x"] - b["w"] // 2
    bx1 = bx0 + b["w"] - 1
    ay0 = a["y"] - a["h"] // 2
    ay1 = ay0 + a["h"] - 1
    by0 = b["y"] - b["h"] // 2
    by1 = by0 + b["h"] - 1
    return not (ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0)


def generate_scene(cfg: GeneratorConfig, rng) -> Scene:
    """Rejection-sample a scene of non-overlapping, band-placed objects."""
    n = int(rng.integers(cfg.n_objects[0], cfg.n_objects[1] + 1)) if cfg.n_objects[1] > cfg.n_objects[0] else cfg.n_objects[0]
    bands = default_bands(cfg.height)
    if cfg.distinct_categories and n <= len(cfg.categories):
        cats = list(rng.choice(cfg.categories, size=n, replace=False))
    else:
        cats = [cfg.categories[int(rng.integers(0, len(cfg.categories)))] for _ in range(n)]
    objects = []
    placed = []
    for i, cat in enumerate(cats):
        priors, (wlo, whi), (hlo, hhi) = CATEGORY_PRIORS[cat]
        box = None
        for _ in range(cfg.max_attempts):
            w = int(rng.integers(wlo, whi + 1))
            h = int(rng.integers(hlo, hhi + 1))
            band = BANDS[inference.resample_index(rng, priors)]
            blo, bhi = bands[band]
            ylo = max(blo, h // 2)
            yhi = min(bhi, cfg.height - 1 - (h - 1) // 2)
            if ylo > yhi:
                continue
            y = int(rng.integers(ylo, yhi + 1))
            x = int(rng.integers(w // 2, cfg.width - (w - 1) // 2))
            cand = {"x": x, "y": y, "w": w, "h": h}
            if all(not _boxes_overlap(cand, p) for p in placed):
                box = cand
                break
        if box is None:
            raise SceneError(f"could not place object {i} ({cat}) after {cfg.max_attempts} attempts")
        placed.append(box)
        objects.append(SceneObject(id=f"{cat}_{i}", category=cat, kind="constant", box=box))
    return Scene(cfg.width, cfg.height, objects, bands, cfg.k)


# ---------------------------------------------------------------------------
# Fill-in-the-blank tasks


@dataclass
class FitbTask:
    """A scene with hidden objects, candidate slots, and a statement.

    The hidden objects become variable entities; their original boxes are
    kept (identity withheld) as the candidate slots.  `truth` maps each
    variable entity id to the blank id of its true slot.
    """

    scene: Scene
    labels: dict            # variable entity id -> category label
    blanks: list            # (blank id, box dict)
    statement: str
    truth: dict             # variable entity id -> blank id
    relation_fraction: float


def _spatial_atom(name: str, a: str, b: str) -> str:
    return f"{name}({a}, {b}; img)"


def true_relations(objects_by_id: dict) -> list:
    """All strictly-held directional relations between the given boxes.

    One x-axis and one y-axis atom per pair at most, in the canonical
    direction; strictness follows the predicates' hard components, so a
    statement built from these is always satisfiable by the true layout.
    """
    rels = []
    ids = list(objects_by_id)
    for a, b in itertools.combinations(ids, 2):
        va = {("a", at): v for at, v in objects_by_id[a].items()}
        vb = {("b", at): v for at, v in objects_by_id[b].items()}
        vals = {**va, **vb}
        if holds_pointwise("leftof", ("a", "b"), vals):
            rels.append(("leftof", a, b))
        elif holds_pointwise("leftof", ("b", "a"), {**vb, **va}):
            rels.append(("leftof", b, a))
        if holds_pointwise("above", ("a", "b"), vals):
            rels.append(("above", a, b))
        elif holds_pointwise("above", ("b", "a"), vals):
            rels.append(("above", b, a))
    return rels


def build_fitb_task(scene: Scene, f: float, rng, n_blanks: int | None = None) -> FitbTask:
    """Hide objects from a fully constant scene and build the statement.

    Each strictly-true pairwise relation between hidden objects is included
    independently with probability `f`; the statement is the conjunction of
    one category atom per hidden object plus the included spatial atoms.
    """
    if not 0.0 <= f <= 1.0:
        raise SceneError(f"relation fraction {f} outside [0, 1]")
    removable = [o for o in scene.objects if o.kind == "constant"]
    if len(removable) < 2:
        raise SceneError("need at least 2 removable objects")
    if n_blanks is None:
        n_blanks = min(len(removable), int(rng.integers(2, min(4, len(removable)) + 1)))
    if n_blanks < 2:
        raise SceneError("need at least 2 blanks")
    chosen_idx = sorted(rng.choice(len(removable), size=n_blanks, replace=False).tolist())
    hidden = [removable[i] for i in chosen_idx]
    hidden_ids = {o.id for o in hidden}

    objects = []
    labels = {}
    truth = {}
    blanks = []
    var_ids = {}
    for o in scene.objects:
        if o.id in hidden_ids:
            var_id = f"obj_{o.id}"
            var_ids[o.id] = var_id
            objects.append(SceneObject(id=var_id, category=o.category, kind="variable"))
            labels[var_id] = o.category
            blank_id = f"blank_{len(blanks)}"
            blanks.append((blank_id, dict(o.box)))
            truth[var_id] = blank_id
        else:
            objects.append(o)
    task_scene = Scene(scene.width, scene.height, objects, scene.bands, scene.k)

    atoms = [f'category({var_ids[o.id]}; "{o.category}", img)' for o in hidden]
    rels = true_relations({o.id: o.box for o in hidden})
    for name, a, b in rels:
        if f >= 1.0 or (f > 0.0 and rng.random() < f):
            atoms.append(_spatial_atom(name, var_ids[a], var_ids[b]))
    statement = " & ".join(atoms)
    return FitbTask(task_scene, labels, blanks, statement, truth, f)


# ---------------------------------------------------------------------------
# Solvers and scoring


def _mappings(var_ids, n_blanks):
    """All injective assignments of variables to blank indices."""
    return itertools.permutations(range(n_blanks), len(var_ids))


def calm_solve(task: FitbTask, provider) -> dict:
    """Assign labels to blanks by maximizing statement truth over all
    injective mappings; ties go to the lexicographically first mapping."""
    stmt = validate(parse_statement(task.statement), task.scene)
    var_ids = sorted(task.labels)
    if len(var_ids) > len(task.blanks):
        raise SceneError("more objects than blanks")
    ctxs = inference.atom_contexts(stmt, provider)
    blank_values = [
        {a: box[a] for a in ATTRS} for _, box in task.blanks
    ]
    var_index = {v: i for i, v in enumerate(var_ids)}

    memo = {}

    def atom_value(ai, mapping) -> float:
        atom = stmt.atoms[ai]
        ents = tuple(sorted({e for e, _ in atom.free_pairs}))
        key = (ai, tuple(mapping[var_index[e]] for e in ents))
        if key not in memo:
            values = {}
            for e in ents:
                bv = blank_values[mapping[var_index[e]]]
                for a in ATTRS:
                    values[(e, a)] = bv[a]
            g = {p: values[p] for p in atom.free_pairs}
            memo[key] = inference.atom_truth(stmt, ai, g, provider, ctxs[ai])
        return memo[key]

    best_mapping = None
    best_truth = -1.0
    for mapping in _mappings(var_ids, len(task.blanks)):
        vals = [atom_value(ai, mapping) for ai in range(len(stmt.atoms))]
        t = inference.amalgamate(stmt.tree, vals)
        if t > best_truth:
            best_truth = t
            best_mapping = mapping
    return {v: task.blanks[best_mapping[i]][0] for i, v in enumerate(var_ids)}


def _satisfying_mappings(task: FitbTask):
    """Mappings under which every spatial atom holds bivalently; category
    atoms have no bivalent content and always pass."""
    stmt = validate(parse_statement(task.statement), task.scene)
    var_ids = sorted(task.labels)
    var_index = {v: i for i, v in enumerate(var_ids)}
    blank_values = [{a: box[a] for a in ATTRS} for _, box in task.blanks]
    spatial = [a for a in stmt.atoms if a.name != "category"]
    good = []
    for mapping in _mappings(var_ids, len(task.blanks)):
        ok = True
        for atom in spatial:
            values = {}
            for e in atom.args:
                bv = blank_values[mapping[var_index[e]]]
                for a in ATTRS:
                    values[(e, a)] = bv[a]
            if not holds_pointwise(atom.name, atom.args, values):
                ok = False
                break
        if ok:
            good.append(mapping)
    return var_ids, good


def fol_baseline_solve(task: FitbTask, rng) -> dict:
    """Bivalent-logic baseline: uniform draw among satisfying mappings,
    falling back to uniform over all mappings when none satisfy."""
    var_ids, good = _satisfying_mappings(task)
    if len(var_ids) > len(task.blanks):
        raise SceneError("more objects than blanks")
    if not good:
        good = list(_mappings(var_ids, len(task.blanks)))
    pick = good[int(rng.integers(0, len(good)))]
    return {v: task.blanks[pick[i]][0] for i, v in enumerate(var_ids)}


def unique_satisfying(task: FitbTask) -> bool:
    _, good = _satisfying_mappings(task)
    return len(good) == 1


@dataclass(frozen=True)
class AssignmentScore:
    object_accuracy: float
    scene_accuracy: int


def score(assignment: dict, task: FitbTask) -> AssignmentScore:
    """Fraction of objects placed on their true slots, and whether all were."""
    if set(assignment) != set(task.truth):
        raise SceneError("assignment does not cover exactly the hidden objects")
    correct = sum(1 for v, b in assignment.items() if task.truth[v] == b)
    obj_acc = correct / len(task.truth)
    return AssignmentScore(obj_acc, 1 if correct == len(task.truth) else 0)


# ---------------------------------------------------------------------------
# Training data and benchmark drivers


def build_training_records(n_scenes: int, seed: int, cfg: GeneratorConfig | None = None):
    """Decision records from generated scenes, via full-relation tasks.

    Every scene is turned into a task with all relations included; records
    are the tree decisions its true grounding takes, conditioned on boxes
    exactly as inference sees them.
    """
    import numpy as np

    cfg = cfg or GeneratorConfig()
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n_scenes):
        scene = generate_scene(cfg, rng)
        task = build_fitb_task(scene, 1.0, rng)
        stmt = validate(parse_statement(task.statement), task.scene)
        blank_boxes = dict(task.blanks)
        grounding = {}
        for var_id, blank_id in task.truth.items():
            for a in ATTRS:
                grounding[(var_id, a)] = blank_boxes[blank_id][a]
        embeds = {}
        for ai, attr, path, box, n_children, correct in inference.iter_decisions(stmt, grounding):
            atom = stmt.atoms[ai]
            if atom.text not in embeds:
                embeds[atom.text] = neural.embed_context(task.scene, atom.text)
            records.append(
                neural.DecisionRecord(
                    pred=atom.name,
                    args=atom.args,
                    attr=attr,
                    path=path,
                    box=box,
                    correct=correct,
                    n_children=n_children,
                    ctx=embeds[atom.text],
                )
            )
    return records


def benchmark_fitb(n_scenes: int, fractions, provider, seed: int,
                   cfg: GeneratorConfig | None = None) -> dict:
    """Generate -> task -> solve -> score for both methods at each fraction."""
    import numpy as np

    cfg = cfg or GeneratorConfig()
    report = {"scenes": n_scenes, "seed": seed, "fractions": {}}
    for f in fractions:
        rng = np.random.default_rng(seed)
        calm_obj, calm_scene = [], []
        fol_obj, fol_scene = [], []
        uniq_calm, uniq_fol = [], []
        n_blank_list = []
        for _ in range(n_scenes):
            scene = generate_scene(cfg, rng)
            task = build_fitb_task(scene, f, rng)
            n_blank_list.append(len(task.blanks))
            calm_assign = calm_solve(task, provider)
            fol_assign = fol_baseline_solve(task, rng)
            cs = score(calm_assign, task)
            fs = score(fol_assign, task)
            calm_obj.append(cs.object_accuracy)
            calm_scene.append(cs.scene_accuracy)
            fol_obj.append(fs.object_accuracy)
            fol_scene.append(fs.scene_accuracy)
            if f >= 1.0 and unique_satisfying(task):
                uniq_calm.append(cs.scene_accuracy)
                uniq_fol.append(fs.scene_accuracy)
        entry = {
            "calm": {"object_accuracy": _mean(calm_obj), "scene_accuracy": _mean(calm_scene)},
            "fol": {"object_accuracy": _mean(fol_obj), "scene_accuracy": _mean(fol_scene)},
            "uniform_object_baseline": _mean([1.0 / n for n in n_blank_list]),
            "mean_blanks": _mean(n_blank_list),
        }
        if f >= 1.0:
            entry["unique_mapping"] = {
                "count": len(uniq_calm),
                "calm_scene_accuracy": _mean(uniq_calm) if uniq_calm else None,
                "fol_scene_accuracy": _mean(uniq_fol) if uniq_fol else None,
            }
        report["fractions"][f"{f:g}"] = entry
    return report


def _mean(xs):
    return sum(xs) / len(xs) if xs else 0.0
