"""
ergojump Version file
"""

__author__ = "Justin Flannery"
__email__ = "juftin@juftin.com"
__application__ = "ergojump"
__version__ = "0.3.0"
