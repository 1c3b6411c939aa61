"""Numerical solver for the generalized Weinberg-Salam dyon boundary-value problem."""
from .errors import *  # noqa: F401,F403
from .params import DerivedConstants, Parameters, derive, validate
from .profile import FIELDS, FieldProfile, make_grid

__all__ = ["DerivedConstants", "Parameters", "derive", "validate", "FIELDS", "FieldProfile", "make_grid"]
__version__ = "0.1.0"
