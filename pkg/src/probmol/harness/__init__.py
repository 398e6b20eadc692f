"""Experiment orchestration: datasets, evaluation suites, BO campaigns and reports."""

from .datasets import (REGISTRY, Dataset, DatasetInfo, dataset_info, fetch_dataset,
                       load_dataset, load_registered, sha256_file)
from .experiment import (ExperimentConfig, aggregate_rows, build_ladder, emit_report, evaluate,
                         featurize, median_summary, replay, run_bo_suite, run_eval_suite,
                         run_generalizability, save_bo, save_clusters, save_eval, save_ladder)

__all__ = ["REGISTRY", "Dataset", "DatasetInfo", "dataset_info", "fetch_dataset", "load_dataset",
           "load_registered", "sha256_file", "ExperimentConfig", "aggregate_rows", "build_ladder",
           "emit_report", "evaluate", "featurize", "median_summary", "replay", "run_bo_suite",
           "run_eval_suite", "run_generalizability", "save_bo", "save_clusters", "save_eval",
           "save_ladder"]
