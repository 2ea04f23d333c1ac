"""Shared pytest fixtures."""

import logging
from collections.abc import Iterator

import pytest


@pytest.fixture(autouse=True)
def reset_package_logger() -> Iterator[None]:
    """Undo CLI logging setup so caplog sees package records."""
    yield
    logger = logging.getLogger("offsetaxis")
    logger.handlers.clear()
    logger.setLevel(logging.NOTSET)
    logger.propagate = True
