"""Permutation-generated vector systems used as fixed latent-space targets."""
from ._kernels import BACKEND
from .assignment import AssignmentTable, assign, classify, classify_batch, load_table, save_table
from .combinatorics import MultisetSpec, count_permutations, next_permutation, rank, unrank
from .vector_systems import (A_LABEL, P_LABEL, V21_LABEL, V22_LABEL, DLabel, VectorSystem,
                             build_system, mcs_analytic, mcs_bruteforce, n_min, parse_label,
                             project_hyperplane, validate_label, vector_at)

__all__ = [
    "BACKEND", "AssignmentTable", "assign", "classify", "classify_batch", "load_table", "save_table",
    "MultisetSpec", "count_permutations", "next_permutation", "rank", "unrank",
    "A_LABEL", "P_LABEL", "V21_LABEL", "V22_LABEL", "DLabel", "VectorSystem", "build_system",
    "mcs_analytic", "mcs_bruteforce", "n_min", "parse_label", "project_hyperplane",
    "validate_label", "vector_at",
]
