"""Run-wide defaults."""
import os

DEFAULT_GRID = 9
MAX_CHARTS = 6
MAX_AMBIENT_DIM = 4


def default_resolution(override=None):
    """Grid resolution: explicit value, else ``VFC_GRID``, else the default."""
    if override is not None:
        return int(override)
    env = os.environ.get("VFC_GRID")
    if env:
        v = int(env)
        if v < 1:
            raise ValueError("VFC_GRID must be a positive integer")
        return v
    return DEFAULT_GRID
