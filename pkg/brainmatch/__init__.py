"""
brainmatch: NIfTI ingestion, volumetric template matching and serial-vs-parallel
benchmarking over an in-memory partitioned dataset engine.
"""

__version__ = "0.1.0"
