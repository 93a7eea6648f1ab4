"""Out-of-time-order correlators of the quartic anharmonic oscillator."""

__version__ = "0.1.0"
