"""Interpretable sequence risk prediction workbench: an attention-based
recurrent model over coded event sequences, exact per-code contribution
decomposition, what-if editing, user-steered retraining, cohort
projection, and an HTTP service for the interactive UI."""

__version__ = "0.1.0"
