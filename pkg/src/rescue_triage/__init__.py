"""Rescue-record triage pipeline.

Ingests raw rescue exports (or a seeded synthetic stand-in), extracts
negation-aware keyword features plus health vitals, selects features by
relevance and RFECV, trains seven classical classifiers with grid/random
search and cross-validation, evaluates them on a held-out split, and
compares the best model against a local LLM's zero-shot verdicts.
"""

__version__ = "0.1.0"
