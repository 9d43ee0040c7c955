"""
IFD Simulator - Main Package
Coherent and projective interaction-free detection on a driven qutrit
"""
__version__ = "1.0.0"
