"""
Checkpoint, metrics stream and manifest persistence.
"""
