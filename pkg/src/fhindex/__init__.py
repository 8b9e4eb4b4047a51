"""Exact finite-horizon index computation for discrete-state bandit projects."""

from .calibration import LambdaGrid, calibrate_index, calibrate_index_scalar, predicted_calibration_ops, solve_one_armed
from .countable import beta_index_curve, finite_embedding_crosscheck, rag_from_initial, relevant_count
from .counting import OpCounter
from .model import (BanditModel, BetaState, CountableModelSpec, ModelError, SparseBanditModel,
                    beta_bernoulli_spec, birth_death_instance, random_dense_instance, reachable_sets,
                    validate_model)
from .oracle import oracle_index_bisect, oracle_index_enumerate, oracle_table_bisect, oracle_table_enumerate
from .policy import FhmabInstance, compare_policies, evaluate_heuristic, fhmab_optimal_value
from .rag import IndexTable, ag_reference, block_rag_full, rag_full, rag_full_sparse

__all__ = [
    "BanditModel", "SparseBanditModel", "CountableModelSpec", "BetaState", "ModelError",
    "validate_model", "random_dense_instance", "birth_death_instance", "beta_bernoulli_spec",
    "reachable_sets", "OpCounter", "LambdaGrid", "solve_one_armed", "calibrate_index",
    "calibrate_index_scalar", "predicted_calibration_ops", "IndexTable", "ag_reference", "rag_full",
    "rag_full_sparse", "block_rag_full", "rag_from_initial", "relevant_count",
    "finite_embedding_crosscheck", "beta_index_curve", "oracle_index_enumerate", "oracle_index_bisect",
    "oracle_table_enumerate", "oracle_table_bisect", "FhmabInstance", "fhmab_optimal_value",
    "evaluate_heuristic", "compare_policies",
]
