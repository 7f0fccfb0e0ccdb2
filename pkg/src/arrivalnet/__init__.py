"""Multi-step public-transport arrival-time forecasting."""

__version__ = "0.1.0"
