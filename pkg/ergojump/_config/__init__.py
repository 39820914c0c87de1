"""
ergojump Config Namespaces and Helpers
"""

from .file_config import FileConfig
from .run_config import RunConfig

__all__ = ["FileConfig", "RunConfig"]
