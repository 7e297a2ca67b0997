"""Motif-regularized graph neural networks for semi-supervised node classification."""
__version__ = "0.1.0"
