"""Unit-commitment model reduction with logistic-regression commitment predictions.

The package builds security-constrained unit commitment MILPs, solves them
with its own branch-and-bound, learns per-(generator, period) commitment
classifiers from solved samples, and benchmarks variable-fixing procedures
against the full model.
"""
from .datagen import (Dataset, NoiseParams, Sample, generate_dataset, perturb_profile,
                      read_dataset, shuffle_split, write_dataset)
from .errors import (AttemptCapExceeded, ConflictError, DimensionMismatch, LimitReached,
                     NonFinite, NumericalError, ParseError, ShapeMismatch, StageError,
                     TooFewSamples, UcReduceError, ValidationError)
from .grid import (Branch, Bus, DemandProfile, Generator, GridSystem, base_profile,
                   load_bundled, load_system, save_system)
from .harness import (ExperimentConfig, benchmark, load_config, normalized_sq, normalized_st,
                      run_pipeline, threshold_sensitivity)
from .lr import (FeatureScaler, LrConfig, LrEnsemble, LrTargetModel, PredictionSet, accuracy,
                 featurize, load_ensemble, save_ensemble, train_ensemble, train_target,
                 tune_threshold)
from .mip import (LpSolution, MipOptions, MipResult, WarmStart, fix_and_solve, solve_lp,
                  solve_mip)
from .reduction import (ProcedureId, ReductionOutcome, fixing_counts, run_b1, run_b2, run_p1,
                        run_p2, run_procedure)
from .scuc import Fixings, ProblemStats, ScucProblem, VarRef, apply_fixings, build, problem_stats

__version__ = "0.1.0"
