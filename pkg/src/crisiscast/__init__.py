"""Crisis-aware weekly retail forecasting and keyword essentiality scoring."""

__version__ = "0.1.0"
