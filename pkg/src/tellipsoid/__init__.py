"""Differential gene ranking that accounts for inter-gene correlation."""

from .correlation import (CenteredMatrix, CorrelationModel, build_correlation_model,
                          remove_treatment_effects, theoretical_tcov)
from .data import (ExpressionMatrix, GroupLabels, load_expression_matrix, load_labels,
                   write_expression_matrix, write_labels)
from .errors import ParseError, SolverError, TellipsoidError
from .evaluation import EvaluationReport, GeneratorConfig, comparison_table, empirical_fdr, run_study
from .ranking import (RankedGeneList, TellipsoidScores, rank_genes, rank_raw_t,
                      read_ranked_list, run_tellipsoid, tellipsoid_scores, write_ranked_list)
from .simulation import (BlockCovSpec, GroundTruth, SpikeSpec, gaussian_generate,
                         make_surrogate, verify_observation)
from .solver import SolveReport, brute_force_ustar, mahalanobis_distance, solve_dense, solve_lowrank
from .tstats import TStatistics, ZAPartition, partition_za, two_sample_t

__all__ = [
    "BlockCovSpec", "CenteredMatrix", "CorrelationModel", "EvaluationReport", "ExpressionMatrix",
    "GeneratorConfig", "GroundTruth", "GroupLabels", "ParseError", "RankedGeneList",
    "SolveReport", "SolverError", "SpikeSpec", "TStatistics", "TellipsoidError",
    "TellipsoidScores", "ZAPartition", "brute_force_ustar", "build_correlation_model",
    "comparison_table", "empirical_fdr", "gaussian_generate", "load_expression_matrix",
    "load_labels", "mahalanobis_distance", "make_surrogate", "partition_za", "rank_genes",
    "rank_raw_t", "read_ranked_list", "remove_treatment_effects", "run_study",
    "run_tellipsoid", "solve_dense", "solve_lowrank", "tellipsoid_scores", "theoretical_tcov",
    "two_sample_t", "verify_observation", "write_expression_matrix", "write_labels",
    "write_ranked_list",
]
