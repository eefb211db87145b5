"""Alfalfa yield prediction from weather and harvest records.

Pipeline: ingest raw trial and weather files, engineer five features per
harvest, then compare regression families under nested cross-validation
or train-on-some-states / test-on-another runs.
"""

__version__ = "0.1.0"
