"""Uncertainty-aware tiled semantic segmentation.

A Bayesian (MC-dropout) encoder-decoder segmenter for large images processed
as overlapping tiles, with uncertainty-driven curriculum resampling of the
training tiles, an entropy-penalized training loss, and reliability metrics
over the (correct/incorrect x certain/uncertain) taxonomy.
"""

__version__ = "0.1.0"
