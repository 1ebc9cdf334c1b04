"""
Schema definitions for adversarial data-selection training.

This package contains the run configuration sections, the records a run
emits (metrics lines, manifest, gradient-check report) and the validator
applied to raw configuration documents.
"""
