"""
Numerics, attacks, selection and the training loop.
"""
