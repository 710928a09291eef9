"""
Rate calculators, slope fits and run comparisons.
"""
