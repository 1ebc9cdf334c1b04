"""
Adversarial Data Selection - adversarial training with loss-ranked mini-batch selection
"""

__version__ = "0.1.0"
