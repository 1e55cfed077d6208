"""Explainable species-selection decision support.

Conjunctive matching of species records against a five-group criteria
taxonomy, with why-not explanations, selection set-algebra, and a
profile-driven suggestion agent.
"""

__version__ = "0.1.0"
