"""Hierarchical consensus network policy."""

from .params import HcnParams, PolicyShape

__all__ = ['HcnParams', 'PolicyShape']
