"""Python surface of the embedding/retrieval/fusion core."""

from contextlib import contextmanager

from ._core import *  # noqa: F401,F403
from ._core import grad_enabled, set_grad_enabled


@contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    prev = grad_enabled()
    set_grad_enabled(False)
    try:
        yield
    finally:
        set_grad_enabled(prev)
