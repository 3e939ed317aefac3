"""Bayesian optimization with GP surrogates, a family of improvement-based
acquisition policies, and the exploration/exploitation benchmark around them.
"""

__version__ = "0.1.0"
