"""gcart: histogram-conditioned rational tone curves for robust classification.

A global per-channel tone-mapping front-end whose curve coefficients are
predicted from a differentiable soft histogram by a small shared MLP, trained
end-to-end through a classifier. Ships with classical baselines (histogram
equalization, CLAHE, gamma), synthetic illumination corruptions, a FLOPs
accountant, and a desk-scale training/evaluation harness.
"""

__version__ = "0.1.0"

__all__ = [
    "engine",
    "softhist",
    "tonecurve",
    "hypernet",
    "classical",
    "corruptions",
    "trainer",
    "evalreport",
    "data",
    "cli",
]
