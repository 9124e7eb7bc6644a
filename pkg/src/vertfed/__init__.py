"""Vertical federated learning over inner-product functional encryption.

Parties holding disjoint feature columns of the same records train linear
and logistic models plus linear SVMs with a two-phase secure aggregation:
per-sample partial models are summed across parties under multi-input FE,
then residual-weighted feature columns are summed across the batch under
single-input FE. A trusted key authority gates every functional-key
request and an in-process simulator meters all traffic.
"""

__version__ = "0.1.0"

from vertfed.backend import ACTIVE as ACTIVE_BACKEND
from vertfed.backend import HAS_NUMBA
from vertfed.fixedpoint import FixedPointCodec
from vertfed.groups import DlogSolver, DlogTable, GroupContext, dlog, group_gen

__all__ = [
    "ACTIVE_BACKEND",
    "HAS_NUMBA",
    "FixedPointCodec",
    "DlogSolver",
    "DlogTable",
    "GroupContext",
    "dlog",
    "group_gen",
    "__version__",
]
