"""Predict intraday trend direction of one instrument from the lagged trend
slopes of many others, with the evaluation protocols and baselines needed to
judge whether the signal is real."""

__version__ = "0.1.0"
