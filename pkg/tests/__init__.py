"""
Test suite for the IFD simulator
"""
