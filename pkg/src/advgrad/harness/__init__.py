"""Data ingestion, experiment drivers, result files and the command line."""

from .config import ConfigError, ExperimentConfig, read_config_file
from .libsvm import PRESETS, LibsvmFormatError, RawDataset, parse_libsvm, preprocess, write_libsvm
from .results import FIELDS, ResultRow, emit, read_results
