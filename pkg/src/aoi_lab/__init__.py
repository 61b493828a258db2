"""Age-of-information versus transmit-power tradeoffs on a short-packet link."""

__version__ = "0.1.0"
