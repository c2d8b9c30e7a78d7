"""Simulated ACO-OFDM visible-light link with pilot channel estimation and an MLP tap predictor."""

__version__ = "0.1.0"
