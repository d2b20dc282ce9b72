"""Offline triage benchmarking for peer-support forum posts.

Feature extraction from post text (rule-based sentiment, category lexicons,
ingested sentence embeddings), sentence-to-post aggregation, classifier
pipelines with an evolutionary pipeline search, repeated stratified
cross-validation, shuffle baselines, and post-hoc analyses (distance-matrix
correlation, permutation feature importance, token-masking explanations).
"""

__version__ = "0.1.0"
