"""Logistic regression with missing data: estimators and a Monte Carlo lab."""

__version__ = "0.1.0"
