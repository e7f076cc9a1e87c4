# logger.py
import dataclasses
import json
import logging
import logging.config
import os
import pathlib
from typing import Any, Dict, Optional

import numpy as np

LOGGER_NAME: str = "radar_ba"
DEFAULT_CONFIG: pathlib.Path = pathlib.Path(__file__).with_name("logging_config.json")


def get_logger() -> logging.Logger:
    return logging.getLogger(LOGGER_NAME)


def setup_logging(config_file: Optional[str] = None, level: Optional[str] = None) -> logging.Logger:
    """Configure logging from the dictConfig document and bridge the pipeline framework's logger."""
    logger = logging.getLogger(LOGGER_NAME)

    path = pathlib.Path(config_file) if config_file else DEFAULT_CONFIG
    with open(path) as f_in:
        logging_config: Dict[str, Any] = json.load(f_in)

    # File handlers write below logs/ by default; create their directories up front.
    for handler in logging_config.get("handlers", {}).values():
        filename = handler.get("filename")
        if filename:
            directory = os.path.dirname(filename)
            if directory:
                os.makedirs(directory, exist_ok=True)

    logging.config.dictConfig(logging_config)
    if level:
        logger.setLevel(level.upper())

    try:
        from stream_pipeline.logger import PipelineLogger
    except ImportError:
        logger.debug("stream_pipeline not installed; pipeline logger bridge skipped")
        return logger

    pipeline_logger: PipelineLogger = PipelineLogger()
    pipeline_logger.set_debug(logger.isEnabledFor(logging.DEBUG))
    pipeline_logger.set_info(logger.info)
    pipeline_logger.set_warning(logger.warning)
    pipeline_logger.set_error(logger.error)
    pipeline_logger.set_critical(logger.critical)
    pipeline_logger.set_log(logger.log)
    pipeline_logger.set_exception(logger.exception)
    pipeline_logger.set_excepthook(logger.error)
    pipeline_logger.set_threading_excepthook(logger.error)

    return logger


LOG_RECORD_BUILTIN_ATTRS: set[str] = {
    "args", "asctime", "created", "exc_info", "exc_text", "extra", "filename",
    "funcName", "levelname", "levelno", "lineno", "module", "msecs", "message",
    "msg", "name", "pathname", "process", "processName", "relativeCreated",
    "stack_info", "thread", "threadName", "taskName",
}


def to_loggable(value: Any, max_length: int = 0) -> Any:
    """Turn values carried in `extra=` into JSON-friendly structures."""
    if isinstance(value, BaseException):
        return str(value)
    if isinstance(value, dict):
        return {str(k): to_loggable(v, max_length) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        return [to_loggable(v, max_length) for v in value]
    if isinstance(value, np.ndarray):
        return to_loggable(value.tolist(), max_length)
    if isinstance(value, np.generic):
        return value.item()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_loggable(getattr(value, f.name), max_length) for f in dataclasses.fields(value)}
    if isinstance(value, (bool, int, float)) or value is None:
        return value
    text = str(value)
    if max_length > 0 and len(text) > max_length:
        return text[:max_length] + "..."
    return text


class MyJSONFormatter(logging.Formatter):
    """One JSON object per record; `fmt_keys` maps output keys to LogRecord attributes."""

    def __init__(
        self,
        datefmt: str = '%Y-%m-%dT%H:%M:%S%z',
        max_length: int = 0,
        fmt_keys: Optional[Dict[str, str]] = None,
        *args: Any,
        **kwargs: Any
    ) -> None:
        super().__init__(*args, **kwargs)
        self.datefmt: str = datefmt
        self.max_length: int = max_length
        self.fmt_keys: Dict[str, str] = fmt_keys or {}
        for key, value in self.fmt_keys.items():
            if value not in LOG_RECORD_BUILTIN_ATTRS:
                raise ValueError(f"Invalid value '{value}' in fmt_keys")

    def format(self, record: logging.LogRecord) -> str:
        log_record: Dict[str, Any] = {}
        for key, value in self.fmt_keys.items():
            if value == 'asctime':
                log_record[key] = self.formatTime(record, self.datefmt)
            elif value == 'message':
                log_record[key] = record.getMessage()
            elif value == 'exc_info':
                log_record[key] = self.formatException(record.exc_info) if record.exc_info else None
            else:
                log_record[key] = getattr(record, value, None)

        if 'extra' in self.fmt_keys.values():
            extra = {k: v for k, v in record.__dict__.items() if k not in LOG_RECORD_BUILTIN_ATTRS and not k.startswith('_')}
            if extra:
                log_record['extra'] = extra

        return json.dumps(to_loggable(log_record, self.max_length), default=str)


class SimpleJSONFormatter(logging.Formatter):
    """Indented message plus extras, meant for reading on a terminal."""

    def __init__(self, max_length: int = 64, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.max_length: int = max_length

    def format(self, record: logging.LogRecord) -> str:
        log_record: Dict[str, Any] = {"message": record.getMessage()}
        extra: Dict[str, Any] = {
            key: value for key, value in record.__dict__.items()
            if key not in LOG_RECORD_BUILTIN_ATTRS and not key.startswith('_')
        }
        if extra:
            log_record["extra"] = extra
        return json.dumps(to_loggable(log_record, self.max_length), default=str, indent=4)
