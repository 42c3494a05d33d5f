from collections import deque
from datetime import datetime
import logging
import sys
import threading

logs = None
buffer_handler = None


class RingBufferHandler(logging.Handler):
    def __init__(self, capacity: int):
        super().__init__()
        self._lock = threading.Lock()
        self._flush_callbacks = []
        self._logs_since_flush = []
        self.records = deque(maxlen=capacity)

    def emit(self, record):
        entry = {"t": datetime.fromtimestamp(record.created).isoformat(), "l": record.levelname, "m": self.format(record)}
        with self._lock:
            self._logs_since_flush.append(entry)
            self.records.append(entry)

    def flush(self):
        with self._lock:
            pending, self._logs_since_flush = self._logs_since_flush, []
        for cb in self._flush_callbacks:
            cb(pending)

    def on_flush(self, callback):
        self._flush_callbacks.append(callback)


def get_logs():
    return logs


def on_flush(callback):
    if buffer_handler is not None:
        buffer_handler.on_flush(callback)


def setup_logger(log_level: str = 'INFO', capacity: int = 300, use_stdout: bool = False):
    global logs
    global buffer_handler
    if logs is not None:
        return

    buffer_handler = RingBufferHandler(capacity)
    buffer_handler.setFormatter(logging.Formatter("%(message)s"))
    logs = buffer_handler.records

    # Setup default global logger
    logger = logging.getLogger()
    logger.setLevel(log_level)

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(logging.Formatter("%(message)s"))

    if use_stdout:
        # Only errors and critical to stderr
        stream_handler.addFilter(lambda record: not record.levelno < logging.ERROR)

        # Lesser to stdout
        stdout_handler = logging.StreamHandler(sys.stdout)
        stdout_handler.setFormatter(logging.Formatter("%(message)s"))
        stdout_handler.addFilter(lambda record: record.levelno < logging.ERROR)
        logger.addHandler(stdout_handler)

    logger.addHandler(stream_handler)
    logger.addHandler(buffer_handler)
