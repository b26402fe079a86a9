"""Inference over grounded statements: exact truth evaluation, pruned
truth maximization, and truth-proportional sampling.

All three procedures share one refinement semantics.  Free attributes are
refined one at a time in a fixed order (entities in scene declaration
order, attributes x, y, w, h); earlier attributes appear as singletons in
every predicate's subdomain box, later ones as full ranges.  At each tree
node a predicate's provider emits factors over the child subdomains, any
child whose box is certainly violating is blocked, and the surviving
factors are renormalized.  A predicate's truth is the product of the
renormalized factors along its path; a blocked step makes it exactly 0.
Connectives amalgamate per-predicate truths at the end: conjunction is
min, disjunction max, negation 1 - t, and thresholded quantifiers are
bivalent.

Because each renormalized factor is at most 1, per-predicate truth only
decreases as refinement deepens.  That monotonicity is what makes the
maximizer's pruning and the ancestral sampler exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain_tree import DomainTree, is_leaf
from .predicates import (
    HardVerdict,
    SubdomainBox,
    block_and_renormalize,
    hard_check,
    provide_factors,
)
from .statement import GroundedStatement, Pair
from . import neural


class InferenceError(ValueError):
    pass


class UnsatisfiableError(InferenceError):
    """Every grounding is ruled out by hard components."""


class UnsupportedStatementError(InferenceError):
    """The procedure cannot handle this statement shape (e.g. negation)."""


class CapExceededError(InferenceError):
    """The grounding space is larger than the enumeration cap."""


class AllZeroTruthError(InferenceError):
    """No grounding has positive truth, so there is nothing to sample."""


class ProposalRetryError(InferenceError):
    """The approximate sampler kept drawing all-zero-truth candidates."""


DEFAULT_CAP = 2**20


@dataclass(frozen=True)
class Grounding:
    """A complete assignment of values to the statement's free attributes."""

    pairs: tuple[Pair, ...]
    values: tuple[int, ...]

    def __getitem__(self, pair: Pair) -> int:
        return self.values[self.pairs.index(pair)]

    def get(self, pair: Pair, default=None):
        try:
            return self[pair]
        except ValueError:
            return default

    def as_dict(self) -> dict:
        return dict(zip(self.pairs, self.values))

    def items(self):
        return zip(self.pairs, self.values)


def _as_value_map(required_pairs, g) -> dict:
    if isinstance(g, Grounding):
        m = g.as_dict()
    elif hasattr(g, "items"):
        m = dict(g.items())
    else:
        raise TypeError(f"not a grounding: {g!r}")
    missing = [p for p in required_pairs if p not in m]
    if missing:
        raise InferenceError(f"grounding is missing values for {missing}")
    return m


def amalgamate(tree, atom_values) -> float:
    """Combine per-atom truths through the statement's connective tree."""
    tag = tree[0]
    if tag == "atom":
        return atom_values[tree[1]]
    if tag == "min":
        return min(amalgamate(c, atom_values) for c in tree[1])
    if tag == "max":
        return max(amalgamate(c, atom_values) for c in tree[1])
    if tag == "not":
        return 1.0 - amalgamate(tree[1], atom_values)
    if tag == "thresh":
        _, op, t, kids = tree
        vals = [amalgamate(c, atom_values) for c in kids]
        agg = min(vals) if op == "min" else max(vals)
        return 1.0 if agg >= t else 0.0
    raise TypeError(f"bad statement tree node {tree!r}")


def atom_contexts(stmt: GroundedStatement, provider) -> list:
    """Context embedding per atom, or Nones for context-free providers."""
    if not getattr(provider, "needs_context", False):
        return [None] * len(stmt.atoms)
    memo = {}
    out = []
    for atom in stmt.atoms:
        key = atom.text
        if key not in memo:
            memo[key] = neural.embed_context(stmt.scene, atom.text)
        out.append(memo[key])
    return out


# ---------------------------------------------------------------------------
# Single-atom walks


def _blocked(atom, box) -> bool:
    return hard_check(atom.name, atom.args, box) is HardVerdict.BLOCKED


def atom_truth(stmt: GroundedStatement, atom_index: int, grounding, provider,
               ctx=None, trace=None) -> float:
    """Truth of one predicate occurrence at a grounding.

    Walks each of the atom's free attributes in refinement order,
    multiplying the blocking-renormalized factor of the child containing
    the grounded value; returns 0.0 the moment a blocked subdomain is
    entered.  If `trace` is a list it receives the running product after
    every multiplication.
    """
    atom = stmt.atoms[atom_index]
    values = _as_value_map(atom.free_pairs, grounding) if atom.free_pairs else {}
    box = dict(atom.base_box)
    truth = 1.0
    for pair in atom.free_pairs:
        tree = stmt.trees[pair]
        v = values[pair]
        if not tree.lo <= v <= tree.hi:
            raise InferenceError(f"value {v} for {pair} outside [{tree.lo}, {tree.hi}]")
        if _blocked(atom, box):
            return 0.0
        node = tree.root
        path = ()
        while not is_leaf(node):
            kids = tree.split(node)
            factors = provide_factors(
                provider, atom.name, atom.args, pair[1],
                SubdomainBox(dict(box), pair, path), ctx,
            )
            adj, mask = _adjusted(atom, box, pair, kids, factors)
            idx = _child_index(kids, v)
            if adj is None or mask[idx]:
                return 0.0
            truth *= adj[idx]
            if trace is not None:
                trace.append(truth)
            node = kids[idx]
            path = path + (idx,)
            box[pair] = node
        box[pair] = node
    if not atom.free_pairs and _blocked(atom, box):
        return 0.0
    return truth


def _adjusted(atom, box, pair, kids, factors):
    """Slice provider output to the child count, block and renormalize."""
    if len(factors) < len(kids):
        raise InferenceError(
            f"provider returned {len(factors)} factors for a node with {len(kids)} children"
        )
    factors = factors[: len(kids)]
    mask = []
    for kid in kids:
        box[pair] = kid
        mask.append(_blocked(atom, box))
    box[pair] = (kids[0][0], kids[-1][1])
    adj = block_and_renormalize(factors, mask)
    return adj, mask


def _child_index(kids, v: int) -> int:
    for i, (lo, hi) in enumerate(kids):
        if lo <= v <= hi:
            return i
    raise InferenceError(f"value {v} not covered by children {kids}")


def atom_truths(stmt: GroundedStatement, grounding, provider, ctxs=None) -> list[float]:
    if ctxs is None:
        ctxs = atom_contexts(stmt, provider)
    return [atom_truth(stmt, i, grounding, provider, ctxs[i]) for i in range(len(stmt.atoms))]


def evaluate(stmt: GroundedStatement, grounding, provider) -> float:
    """Statement truth at a specific grounding, in [0, 1]."""
    _as_value_map(stmt.free_pairs, grounding)  # reject partial groundings up front
    return amalgamate(stmt.tree, atom_truths(stmt, grounding, provider))


def iter_decisions(stmt: GroundedStatement, grounding):
    """Yield the refinement decisions a ground-truth grounding induces.

    One (atom_index, attr, path, box snapshot, n_children, correct child)
    per internal node per atom, with boxes exactly as inference would see
    them.  Used to build supervised training records.
    """
    values = _as_value_map(stmt.free_pairs, grounding)
    for ai, atom in enumerate(stmt.atoms):
        box = dict(atom.base_box)
        for pair in atom.free_pairs:
            tree = stmt.trees[pair]
            v = values[pair]
            node = tree.root
            path = ()
            while not is_leaf(node):
                kids = tree.split(node)
                idx = _child_index(kids, v)
                yield ai, pair[1], path, dict(box), len(kids), idx
                node = kids[idx]
                path = path + (idx,)
                box[pair] = node
            box[pair] = node


# ---------------------------------------------------------------------------
# Sequential-refinement search engine (shared by maximize / brute force)


class _Engine:
    def __init__(self, stmt: GroundedStatement, provider, ctxs=None):
        self.stmt = stmt
        self.provider = provider
        self.ctxs = ctxs if ctxs is not None else atom_contexts(stmt, provider)
        self.pairs = stmt.free_pairs
        self.trees = [stmt.trees[p] for p in self.pairs]
        self.boxes = [dict(a.base_box) for a in stmt.atoms]
        self.involved = [
            tuple(ai for ai, a in enumerate(stmt.atoms) if p in a.free_pairs) for p in self.pairs
        ]
        # atoms with no free attributes are decided once, up front
        base = []
        for ai, atom in enumerate(stmt.atoms):
            dead = not atom.free_pairs and _blocked(atom, self.boxes[ai])
            base.append(0.0 if dead else 1.0)
        self.base_truths = tuple(base)
        self.values: list[int] = []

    def score(self, truths) -> float:
        return amalgamate(self.stmt.tree, truths)

    # -- exhaustive DFS -------------------------------------------------

    def run(self, on_leaf, prune=None):
        """Depth-first enumeration in refinement-lexicographic order.

        `prune(pair, interval, bound)` is consulted with the statement-level
        upper bound before entering a child subtree; returning True skips it.
        """
        self._pair(0, self.base_truths, on_leaf, prune)

    def _pair(self, pi, truths, on_leaf, prune):
        if pi == len(self.pairs):
            on_leaf(tuple(self.values), truths)
            return
        pair = self.pairs[pi]
        involved = self.involved[pi]
        atoms = self.stmt.atoms
        truths = list(truths)
        for ai in involved:
            if truths[ai] > 0.0 and _blocked(atoms[ai], self.boxes[ai]):
                truths[ai] = 0.0
        self._node(pi, self.trees[pi].root, (), tuple(truths), on_leaf, prune)

    def _node(self, pi, node, path, truths, on_leaf, prune):
        if is_leaf(node):
            self.values.append(node[0])
            self._pair(pi + 1, truths, on_leaf, prune)
            self.values.pop()
            return
        pair = self.pairs[pi]
        tree = self.trees[pi]
        kids = tree.split(node)
        steps = self._steps(pi, kids, path, truths)
        for i, kid in enumerate(kids):
            child_truths = self._apply(truths, steps, i)
            if prune is not None:
                bound = self.score(child_truths)
                if prune(pair, kid, bound):
                    continue
            self._descend(pi, kid, truths_after=child_truths, path=path + (i,),
                          node=node, on_leaf=on_leaf, prune=prune)

    def _descend(self, pi, kid, truths_after, path, node, on_leaf, prune):
        for ai in self.involved[pi]:
            self.boxes[ai][self.pairs[pi]] = kid
        self._node(pi, kid, path, truths_after, on_leaf, prune)
        for ai in self.involved[pi]:
            self.boxes[ai][self.pairs[pi]] = node

    def _steps(self, pi, kids, path, truths):
        """Per involved live atom: (atom index, blocked mask, adjusted factors)."""
        pair = self.pairs[pi]
        out = []
        for ai in self.involved[pi]:
            if truths[ai] <= 0.0:
                continue
            atom = self.stmt.atoms[ai]
            box = self.boxes[ai]
            factors = provide_factors(
                self.provider, atom.name, atom.args, pair[1],
                SubdomainBox(dict(box), pair, path), self.ctxs[ai],
            )
            adj, mask = _adjusted(atom, box, pair, kids, factors)
            out.append((ai, mask, adj))
        return out

    @staticmethod
    def _apply(truths, steps, i):
        child = list(truths)
        for ai, mask, adj in steps:
            if adj is None or mask[i]:
                child[ai] = 0.0
            else:
                child[ai] = child[ai] * adj[i]
        return tuple(child)

    # -- greedy first descent -------------------------------------------

    def greedy(self):
        """Follow the locally best child to a leaf; returns (values, truth).

        Ties break toward the lower child index.  Dead ends (a node whose
        children are all blocked) zero that node's edge and re-choose among
        the renormalized siblings.
        """
        truths = self.base_truths
        values = []
        undo = []
        try:
            for pi in range(len(self.pairs)):
                pair = self.pairs[pi]
                atoms = self.stmt.atoms
                t = list(truths)
                for ai in self.involved[pi]:
                    if t[ai] > 0.0 and _blocked(atoms[ai], self.boxes[ai]):
                        t[ai] = 0.0
                truths = tuple(t)
                node = self.trees[pi].root
                path = ()
                while not is_leaf(node):
                    kids = self.trees[pi].split(node)
                    steps = self._steps(pi, kids, path, truths)
                    best_i, best_score = 0, -1.0
                    for i in range(len(kids)):
                        s = self.score(self._apply(truths, steps, i))
                        if s > best_score:
                            best_i, best_score = i, s
                    truths = self._apply(truths, steps, best_i)
                    for ai in self.involved[pi]:
                        self.boxes[ai][pair] = kids[best_i]
                        undo.append((ai, pair))
                    node = kids[best_i]
                    path = path + (best_i,)
                values.append(node[0])
            return tuple(values), self.score(truths)
        finally:
            for ai, pair in undo:
                self.boxes[ai][pair] = self.stmt.atoms[ai].base_box[pair]


@dataclass(frozen=True)
class PrunedBranch:
    pair: Pair
    interval: tuple[int, int]
    bound: float


@dataclass(frozen=True)
class MaximizeResult:
    grounding: Grounding
    truth: float
    pruned: tuple[PrunedBranch, ...]
    greedy_truth: float


def maximize(stmt: GroundedStatement, provider) -> MaximizeResult:
    """Grounding with the maximum statement truth, found by greedy-first
    refinement followed by depth-first search with bound pruning.

    Any branch whose statement-level truth-so-far falls below the best
    known truth is pruned; since per-predicate truth only shrinks along a
    path, the search is exact.  Ties resolve to the grounding that is
    lexicographically smallest in refinement order.  Statements containing
    negation are rejected (their truth is not monotone under refinement).
    """
    if stmt.has_negation():
        raise UnsupportedStatementError("maximize does not support negation; use brute_force_all")
    if not stmt.free_pairs:
        raise InferenceError("statement has no free attributes to maximize over")
    engine = _Engine(stmt, provider)
    greedy_values, greedy_truth = engine.greedy()
    best = {"values": greedy_values, "truth": greedy_truth}
    pruned: list[PrunedBranch] = []

    def prune(pair, interval, bound):
        if bound < best["truth"]:
            pruned.append(PrunedBranch(pair, interval, bound))
            return True
        return False

    def on_leaf(values, truths):
        t = engine.score(truths)
        if t > best["truth"] or (t == best["truth"] and values < best["values"]):
            best["truth"] = t
            best["values"] = values

    engine.run(on_leaf, prune)
    if best["truth"] <= 0.0:
        raise UnsatisfiableError("every grounding is blocked by hard components")
    return MaximizeResult(
        grounding=Grounding(stmt.free_pairs, best["values"]),
        truth=best["truth"],
        pruned=tuple(pruned),
        greedy_truth=greedy_truth,
    )


def brute_force_all(stmt: GroundedStatement, provider, cap: int = DEFAULT_CAP) -> dict:
    """Exact truth of every grounding, keyed by value tuple in refinement
    order.  The enumeration cap guards against combinatorial blow-up."""
    total = 1
    for pair in stmt.free_pairs:
        total *= stmt.trees[pair].size
        if total > cap:
            raise CapExceededError(f"grounding space exceeds cap of {cap}")
    engine = _Engine(stmt, provider)
    out = {}

    def on_leaf(values, truths):
        out[values] = engine.score(truths)

    engine.run(on_leaf)
    return out


# ---------------------------------------------------------------------------
# Truth-proportional sampling


def sample_predicate(stmt: GroundedStatement, provider, rng, atom_index: int = 0,
                     n_samples: int = 1, hard_fn=None):
    """Ancestral sampling of one predicate's free attributes, proportional
    to its truth.

    Descends each domain tree choosing children with probability equal to
    the blocking-renormalized factors.  If every child of a node is
    blocked the sampler backtracks, zeroes the edge into that node,
    renormalizes its siblings and resumes.  Returns a Grounding (or a list
    of them when n_samples > 1).
    """
    atom = stmt.atoms[atom_index]
    if not atom.free_pairs:
        raise InferenceError(f"atom {atom.name} has no free attributes to sample")
    ctx = atom_contexts(stmt, provider)[atom_index]
    if n_samples > 1 and len(atom.free_pairs) == 1 and hard_fn is None:
        return _sample_single_pair_bulk(stmt, atom, provider, ctx, rng, n_samples)
    results = []
    for _ in range(n_samples):
        results.append(_sample_atom_once(stmt, atom, provider, ctx, rng, hard_fn))
    return results[0] if n_samples == 1 else results


def _sample_atom_once(stmt, atom, provider, ctx, rng, hard_fn=None):
    blocked_fn = hard_fn if hard_fn is not None else _blocked
    box = dict(atom.base_box)
    values = []
    for pair in atom.free_pairs:
        tree = stmt.trees[pair]
        if blocked_fn(atom, box):
            raise UnsatisfiableError(f"domain of {pair} is entirely blocked")
        # frames hold [kids, weights, chosen index, node interval]; on a dead
        # end the frame's chosen edge is zeroed and the draw repeats there
        frames = []
        node = tree.root
        while not is_leaf(node):
            path = tuple(f[2] for f in frames)
            kids = tree.split(node)
            factors = provide_factors(
                provider, atom.name, atom.args, pair[1],
                SubdomainBox(dict(box), pair, path), ctx,
            )[: len(kids)]
            weights = []
            for f, kid in zip(factors, kids):
                box[pair] = kid
                weights.append(0.0 if blocked_fn(atom, box) else f)
            box[pair] = node
            while sum(weights) <= 0.0:
                if not frames:
                    raise UnsatisfiableError(f"domain of {pair} is entirely blocked")
                kids, weights, idx, node = frames.pop()
                weights[idx] = 0.0
                box[pair] = node
            idx = resample_index(rng, weights)
            frames.append([kids, weights, idx, node])
            node = kids[idx]
            box[pair] = node
        values.append(node[0])
        box[pair] = node
    return Grounding(atom.free_pairs, tuple(values))


def _sample_single_pair_bulk(stmt, atom, provider, ctx, rng, n_samples):
    """Vectorized ancestral sampling when the atom has one free attribute.

    Precomputes the renormalized factors of every node once, then advances
    all samples level-synchronously with numpy.
    """
    pair = atom.free_pairs[0]
    tree = stmt.trees[pair]
    box = dict(atom.base_box)
    if _blocked(atom, box):
        raise UnsatisfiableError(f"domain of {pair} is entirely blocked")

    table = {}  # path -> (kids, cumulative weights) for live internal nodes

    def weights_at(node, path):
        kids = tree.split(node)
        factors = provide_factors(
            provider, atom.name, atom.args, pair[1],
            SubdomainBox(dict(box), pair, path), ctx,
        )[: len(kids)]
        mask = []
        for kid in kids:
            box[pair] = kid
            mask.append(_blocked(atom, box))
        box[pair] = node
        adj = block_and_renormalize(factors, mask)
        return kids, adj

    def build(node, path):
        """Returns total live mass under node (0 when fully blocked)."""
        if is_leaf(node):
            return 1.0
        kids, adj = weights_at(node, path)
        if adj is None:
            return 0.0
        live = list(adj)
        for i, kid in enumerate(kids):
            if live[i] > 0.0 and build(kid, path + (i,)) == 0.0:
                live[i] = 0.0
        renorm = block_and_renormalize(live, [w == 0.0 for w in live])
        if renorm is None:
            return 0.0
        table[path] = (kids, np.cumsum(renorm))
        return 1.0

    if build(tree.root, ()) == 0.0:
        raise UnsatisfiableError(f"domain of {pair} is entirely blocked")

    paths = [()] * n_samples
    nodes = [tree.root] * n_samples
    out = np.empty(n_samples, dtype=int)
    done = np.zeros(n_samples, dtype=bool)
    while not done.all():
        groups = {}
        for s in range(n_samples):
            if done[s]:
                continue
            groups.setdefault(paths[s], []).append(s)
        for path, members in groups.items():
            kids, cum = table[path]
            draws = rng.random(len(members))
            choice = np.searchsorted(cum, draws, side="right")
            choice = np.minimum(choice, len(kids) - 1)
            for s, c in zip(members, choice):
                kid = kids[c]
                if is_leaf(kid):
                    out[s] = kid[0]
                    done[s] = True
                else:
                    paths[s] = path + (int(c),)
                    nodes[s] = kid
    return [Grounding(atom.free_pairs, (int(v),)) for v in out]


def sample_statement_exact(stmt: GroundedStatement, provider, rng,
                           n_samples: int = 1, cap: int = DEFAULT_CAP):
    """Draw groundings exactly proportional to statement truth by
    enumerating every root-to-leaf product under the cap."""
    table = brute_force_all(stmt, provider, cap)
    keys = list(table.keys())
    weights = np.array([table[k] for k in keys], dtype=float)
    total = weights.sum()
    if total <= 0.0:
        raise AllZeroTruthError("all groundings have zero truth")
    probs = weights / total
    idx = rng.choice(len(keys), size=n_samples, p=probs)
    results = [Grounding(stmt.free_pairs, keys[i]) for i in idx]
    return results[0] if n_samples == 1 else results


def exact_distribution(stmt: GroundedStatement, provider, cap: int = DEFAULT_CAP) -> dict:
    """Normalized statement-truth distribution over all groundings."""
    table = brute_force_all(stmt, provider, cap)
    total = sum(table.values())
    if total <= 0.0:
        raise AllZeroTruthError("all groundings have zero truth")
    return {k: v / total for k, v in table.items()}


def sample_statement_approx(stmt: GroundedStatement, provider, n_proposals: int, rng,
                            n_samples: int = 1, retry_cap: int = 20):
    """Approximate truth-proportional sampling for compound statements.

    Proposal candidates are drawn round-robin from each predicate's own
    ancestral sampler (free attributes outside that predicate's affecting
    set filled uniformly), then one candidate is resampled with weight
    statement-truth / proposal-density.  The density correction keeps the
    output distribution converging on the exact one as n_proposals grows;
    for candidates of equal proposal density the weights reduce to plain
    normalized truths.  Statements containing negation get an extra
    uniform proposal channel so that no positive-truth region is missed.
    """
    if n_proposals < 1:
        raise InferenceError("n_proposals must be >= 1")
    ctxs = atom_contexts(stmt, provider)
    channels = [i for i, a in enumerate(stmt.atoms) if a.free_pairs]
    if not channels:
        raise InferenceError("statement has no free attributes to sample")
    uniform_channel = stmt.has_negation()
    n_channels = len(channels) + (1 if uniform_channel else 0)
    sizes = {p: stmt.trees[p].size for p in stmt.free_pairs}
    # round-robin share of proposals drawn from each channel
    counts = [n_proposals // n_channels + (1 if ci < n_proposals % n_channels else 0)
              for ci in range(n_channels)]

    truth_memo: dict = {}
    density_memo: dict = {}

    def truth_of(values) -> float:
        if values not in truth_memo:
            g = Grounding(stmt.free_pairs, values)
            truth_memo[values] = amalgamate(stmt.tree, atom_truths(stmt, g, provider, ctxs))
        return truth_memo[values]

    def channel_density(ci, values) -> float:
        key = (ci, values)
        if key not in density_memo:
            if ci == len(channels):  # uniform channel
                d = 1.0
                for p in stmt.free_pairs:
                    d /= sizes[p]
            else:
                ai = channels[ci]
                atom = stmt.atoms[ai]
                g = Grounding(stmt.free_pairs, values)
                d = atom_truth(stmt, ai, g, provider, ctxs[ai])
                for p in stmt.free_pairs:
                    if p not in atom.free_pairs:
                        d /= sizes[p]
            density_memo[key] = d
        return density_memo[key]

    def propose(ci) -> tuple:
        vals = {}
        if ci == len(channels):
            for p in stmt.free_pairs:
                t = stmt.trees[p]
                vals[p] = int(rng.integers(t.lo, t.hi + 1))
        else:
            ai = channels[ci]
            atom = stmt.atoms[ai]
            g = _sample_atom_once(stmt, atom, provider, ctxs[ai], rng)
            vals.update(g.as_dict())
            for p in stmt.free_pairs:
                if p not in vals:
                    t = stmt.trees[p]
                    vals[p] = int(rng.integers(t.lo, t.hi + 1))
        return tuple(vals[p] for p in stmt.free_pairs)

    results = []
    for _ in range(n_samples):
        chosen = None
        for _attempt in range(retry_cap):
            candidates = [propose(j % n_channels) for j in range(n_proposals)]
            weights = []
            for c in candidates:
                t = truth_of(c)
                if t <= 0.0:
                    weights.append(0.0)
                    continue
                q = sum(counts[ci] * channel_density(ci, c) for ci in range(n_channels)) / n_proposals
                weights.append(t / q)
            total = sum(weights)
            if total > 0.0:
                chosen = candidates[resample_index(rng, weights)]
                break
        if chosen is None:
            raise ProposalRetryError(
                f"no candidate with positive truth after {retry_cap} rounds of {n_proposals} proposals"
            )
        results.append(Grounding(stmt.free_pairs, chosen))
    return results[0] if n_samples == 1 else results


def resample_index(rng, weights) -> int:
    """Draw an index with probability proportional to the given weights."""
    total = sum(weights)
    if total <= 0.0:
        raise InferenceError("cannot resample from all-zero weights")
    r = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if r < acc:
            return i
    return len(weights) - 1
