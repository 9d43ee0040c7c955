"""
Configuration management for the interaction-free detection simulator
"""
from .settings import Settings, get_settings

__all__ = ["Settings", "get_settings"]
