"""Wavelet-convolution + DCT channel-attention LSTM forecaster and long-short backtester."""

__version__ = "0.1.0"
