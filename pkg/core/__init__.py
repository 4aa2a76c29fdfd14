"""Kriging S-statistics: correlation models, kriging, GLS mean and verification."""
