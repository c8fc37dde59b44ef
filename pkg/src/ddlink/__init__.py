"""Delay-Doppler waveform and receiver simulation toolkit.

A unified simulation stack for OTFS and its relatives (OFDM, FBMC-OQAM,
OSDM, V-OFDM, OTSM, ODDM, OCDM, AFDM) over doubly-selective fading
channels, with linear / message-passing / cross-domain detectors and a
reproducible experiment harness (PSD, Monte-Carlo BER, channel-matrix
dumps, scheme-equivalence reports).
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
