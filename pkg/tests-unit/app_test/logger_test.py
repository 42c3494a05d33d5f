import logging

import pytest

from app.logger import RingBufferHandler


@pytest.fixture
def handler():
    h = RingBufferHandler(3)
    h.setFormatter(logging.Formatter("%(message)s"))
    logger = logging.getLogger("qpcp.test.logger")
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    logger.addHandler(h)
    yield h, logger
    logger.removeHandler(h)


def test_keeps_the_latest_records(handler):
    h, logger = handler
    for i in range(5):
        logger.info(f"message {i}")
    assert [r["m"] for r in h.records] == ["message 2", "message 3", "message 4"]
    assert all(r["l"] == "INFO" for r in h.records)


def test_flush_hands_pending_records_to_callbacks(handler):
    h, logger = handler
    seen = []
    h.on_flush(seen.append)
    logger.warning("first")
    logger.error("second")
    h.flush()
    assert [[r["m"] for r in batch] for batch in seen] == [["first", "second"]]
    h.flush()
    assert seen[-1] == []
