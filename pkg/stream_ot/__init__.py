"""
stream_ot
=========

Entropic optimal transport between continuous distributions from streaming
samples: online Sinkhorn and its compressed variant, with rate and
complexity calculators and a benchmark command line.
"""

__version__ = "1.0.0"
