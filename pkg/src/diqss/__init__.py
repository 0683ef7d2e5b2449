"""Key-rate engine and Monte-Carlo simulator for GHZ-based device-independent
quantum secret sharing with a random key-generation basis."""

__version__ = "0.1.0"
