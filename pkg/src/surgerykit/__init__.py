"""Extractor-based lattice surgery toolkit for quantum LDPC codes."""

__version__ = "0.1.0"
