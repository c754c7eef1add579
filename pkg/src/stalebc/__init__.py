"""Achievable symmetric rates and upper bounds for two-receiver broadcast
channels whose state is known at the decoders and strictly causally at the
encoder."""

__version__ = "0.1.0"
