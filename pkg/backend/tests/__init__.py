"""
Tests package for the HST k-server simulator
"""
