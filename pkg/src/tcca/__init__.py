"""Long-term action anticipation on synthetic Markov-grammar data.

Pipeline: a multi-stage attention encoder segments the observed window, a
query-based parallel decoder predicts the future action sequence and its
durations, bi-directional context heads regularize neighbouring queries, and
a linear-chain CRF with a learnable transition matrix decodes the globally
most likely sequence.
"""

__version__ = "0.1.0"
