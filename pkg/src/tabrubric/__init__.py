"""Rubric-based evaluation of generated tables against a ground truth."""

from .align import Alignment, align, detect_transpose
from .compare import ComparisonTuple, compare_aligned_tables, compare_cells
from .pipeline import evaluate
from .rubric import RubricReport, WeightConfig, compute_gamma, compute_score
from .table import Table, parse_table, read_table

__all__ = [
    "Alignment", "ComparisonTuple", "RubricReport", "Table", "WeightConfig", "align",
    "compare_aligned_tables", "compare_cells", "compute_gamma", "compute_score",
    "detect_transpose", "evaluate", "parse_table", "read_table",
]
__version__ = "0.1.0"
