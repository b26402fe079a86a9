"""Analog-truth spatial logic over k-ary domain trees.

Statements combine spatial and categorical predicates whose truth values
in [0, 1] are products of neural (or tabular) truth factors along domain
tree refinements, with hard geometric components forcing certain
violations to exactly zero.  The package provides exact truth evaluation,
pruned truth maximization, truth-proportional sampling, supervised
training of the factor networks, and a synthetic fill-in-the-blank
benchmark with heatmap export.
"""

from .domain_tree import DomainTree
from .inference import (
    Grounding,
    MaximizeResult,
    brute_force_all,
    evaluate,
    maximize,
    sample_predicate,
    sample_statement_approx,
    sample_statement_exact,
)
from .predicates import (
    HardVerdict,
    SubdomainBox,
    TabularProvider,
    TruthFactorProvider,
    UniformProvider,
    block_and_renormalize,
    hard_check,
)
from .statement import parse_statement, pretty, validate
from .scenes import Scene, SceneObject, build_fitb_task, calm_solve, fol_baseline_solve, generate_scene, score

__version__ = "0.1.0"
