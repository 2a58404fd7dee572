"""
Configuration and Constants Module

Contains application settings, the config.ini loader, custom exceptions, and compiled regex patterns.
"""

import configparser
import logging
import os
import re
from pathlib import Path

# --- Application Version ---
APP_VERSION = "1.0.0"
APP_NAME = "MentionNet"


# --- Application Configuration ---
class MentionNetConfig:
    """Configuration settings for MentionNet. Values can be overridden from config.ini."""
    MATRIX_NODE_CAP = 5000
    MAX_MALFORMED_RATIO = 0.10
    MAX_ERROR_SAMPLES = 20
    MIN_TAIL_POINTS = 5
    INGEST_CHUNK_LINES = 50_000
    MAX_WORKER_THREADS = min(16, (os.cpu_count() or 4))
    TOP_MEMBERS = 5

    # Collection window, used as the synthetic corpus default
    SYNTH_START = "2020-03-08T00:00:00+00:00"
    SYNTH_END = "2020-07-11T23:59:59+00:00"


# --- Custom Exceptions ---
class MentionNetError(Exception):
    """Base exception for all pipeline errors."""
    pass


class ConfigError(MentionNetError):
    """Invalid parameters or configuration (usage error)."""
    pass


class CorpusError(MentionNetError):
    """Base exception for corpus/data errors."""
    pass


class RecordParseError(CorpusError):
    """A single input line could not be parsed into a record."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


class CorpusAbortError(CorpusError):
    """Too many malformed lines; ingestion aborted."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class EmptyCorpusError(CorpusError):
    """The input produced no records at all."""
    pass


class GraphError(MentionNetError):
    """Base exception for graph construction and analysis errors."""
    pass


class EmptyGraphError(GraphError):
    pass


class GraphModeError(GraphError):
    """Operation needs a weighted graph."""
    pass


class MatrixTooLargeError(GraphError):
    pass


class EmptyDistributionError(MentionNetError):
    pass


class RenderError(MentionNetError):
    pass


class InfeasibleSpecError(MentionNetError):
    """Synthetic corpus parameters that cannot be satisfied."""
    pass


class StageError(MentionNetError):
    """Wraps the failure of one pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


# --- Compiled Regex Patterns ---
# '@' must not follow a handle character, and the handle must not run past 15 characters.
MENTION_RE = re.compile(r"(?<![A-Za-z0-9_])@([A-Za-z0-9_]{1,15})(?![A-Za-z0-9_])")
HANDLE_RE = re.compile(r"^[a-z0-9_]{1,15}$")
RT_PREFIX_RE = re.compile(r"^\s*RT\s+@[A-Za-z0-9_]{1,15}\s*:?\s*")
# Illegal XML control characters for spreadsheet cells
XML_CONTROL_RE = re.compile(r"[\x00-\x08\x0B\x0C\x0E-\x1F]")

_SETTINGS_KEYS = {
    'matrixnodecap': ('MATRIX_NODE_CAP', int),
    'maxmalformedratio': ('MAX_MALFORMED_RATIO', float),
    'maxerrorsamples': ('MAX_ERROR_SAMPLES', int),
    'mintailpoints': ('MIN_TAIL_POINTS', int),
    'ingestchunklines': ('INGEST_CHUNK_LINES', int),
    'maxworkerthreads': ('MAX_WORKER_THREADS', int),
    'topmembers': ('TOP_MEMBERS', int),
}


def load_config_file(path):
    """
    Read a config.ini file.

    The [Settings] section overrides MentionNetConfig class attributes in place.
    The [Run] section is returned as a plain dict of strings for RunConfig defaults.

    Returns:
        dict: raw [Run] values (empty when the section is missing)
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"could not parse {path}: {e}") from e

    if parser.has_section('Settings'):
        for key, raw in parser['Settings'].items():
            target = _SETTINGS_KEYS.get(key.lower())
            if target is None:
                logging.warning(f"Unknown setting '{key}' in {path.name}, ignored")
                continue
            attr, cast = target
            try:
                setattr(MentionNetConfig, attr, cast(raw))
            except ValueError as e:
                raise ConfigError(f"invalid value for {key}: {raw!r}") from e

    if parser.has_section('Run'):
        return dict(parser['Run'].items())
    return {}


def write_default_config(path):
    """Write a config.ini with the current defaults."""
    parser = configparser.ConfigParser()
    parser['Settings'] = {
        'MatrixNodeCap': str(MentionNetConfig.MATRIX_NODE_CAP),
        'MaxMalformedRatio': str(MentionNetConfig.MAX_MALFORMED_RATIO),
        'MaxWorkerThreads': str(MentionNetConfig.MAX_WORKER_THREADS),
        'IngestChunkLines': str(MentionNetConfig.INGEST_CHUNK_LINES),
    }
    parser['Run'] = {
        'n1': '2000',
        'n2': '200',
        'min_weight': '200',
        'seed': '0',
        'resolution': '1.0',
    }
    with open(path, 'w', encoding='utf-8') as configfile:
        configfile.write(f"# {APP_NAME} Configuration File\n")
        parser.write(configfile)
