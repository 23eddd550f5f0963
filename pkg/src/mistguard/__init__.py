"""Human presence detection on 160x120 thermal frames for machine safety interlocks."""
__version__ = "0.1.0"
