"""Temporal counterfactual inference lab: simulator, disentangled recurrent
encoder-decoder, and experiment harness."""

__version__ = "0.1.0"
