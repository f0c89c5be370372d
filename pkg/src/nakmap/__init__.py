"""Nakagami parametric imaging toolkit.

Windowed moment / maximum-likelihood / compounded estimators, a pixelwise
closed-form estimator driven by the envelope score function, score-model
training, synthetic benchmark generation, and evaluation statistics.
"""

__version__ = "0.1.0"
