"""Distributed issuance of privacy-preserving health passes."""

__version__ = "0.1.0"
