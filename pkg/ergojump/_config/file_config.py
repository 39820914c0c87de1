"""
File Path Helper
"""

from pathlib import Path


class FileConfig:
    """
    Configuration Namespace for File Paths
    """

    _file_config_module = Path(__file__).resolve()
    CONFIG_DIR = _file_config_module.parent
    ERGOJUMP_DIR = CONFIG_DIR.parent
    PROJECT_DIR = ERGOJUMP_DIR.parent
    DEFAULT_OUTPUT_DIR = Path.cwd().joinpath("ergojump-output")

    REPORT_FILE = "report.json"
    MANIFEST_FILE = "manifest.json"
    FAILURE_FILE = "failure.json"
    PATHS_FILE = "paths.csv"
    SERIES_FILE = "series.csv"
    MEASURE_FILE = "measure.txt"
