"""pastlab: exact-arithmetic workbench for probabilistic termination analysis.

Subpackages cover pGCL syntax and small-step semantics, schedulers,
bounded execution-tree analytics, ordinals in Cantor normal form, the
stochastic Hydra game, certificate checkers for ranking-supermartingale and
ordinal proof rules, and the normal-form program transformers.
"""

__version__ = "0.1.0"
