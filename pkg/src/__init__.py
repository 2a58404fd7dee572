"""
MentionNet - Modular package initialization
"""

from .config import APP_VERSION

__version__ = APP_VERSION
__author__ = "MentionNet Team"
