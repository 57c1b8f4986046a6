"""Exact simulation of product-observable measurements on a path/spin system.

Modules: ``hilbert`` (operators and states), ``measurement`` (projective
measurement and seeded sampling), ``nchv`` (noncontextual value
assignments), ``apparatus`` (detector and beam-combiner stages),
``counterfactual`` (branch enumeration over measurement histories) and
``cli``.
"""

__version__ = "0.1.0"
