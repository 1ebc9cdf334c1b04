"""
Unit tests for adversarial data-selection training.
"""
