"""Black-box testing of web APIs for broken authentication."""

__version__ = "0.1.0"
