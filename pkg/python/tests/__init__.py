"""
Test suite for shrinklab.
"""
