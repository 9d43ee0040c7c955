"""
Feature modules for the IFD simulator
"""
