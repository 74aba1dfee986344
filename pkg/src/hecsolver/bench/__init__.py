"""Experiment harness and command line."""

from .experiment import (PRESETS, RESULT_FIELDS, SPMV_FIELDS, TIMING_METHOD, ExperimentSpec,
                         ReportRow, load_matrix, preset_specs, read_csv, read_json,
                         run_experiment, run_grid, spmv_bench, write_csv, write_json)

__all__ = ["ExperimentSpec", "ReportRow", "RESULT_FIELDS", "SPMV_FIELDS", "TIMING_METHOD",
           "PRESETS", "load_matrix", "run_experiment", "run_grid", "preset_specs",
           "spmv_bench", "write_csv", "read_csv", "write_json", "read_json"]
