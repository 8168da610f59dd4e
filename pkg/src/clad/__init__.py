"""Cost-sensitive decision engine for credit-card limit adjustments."""

__version__ = "0.1.0"
