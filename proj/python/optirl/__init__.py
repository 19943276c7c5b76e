"""Optimistic general-RL agents: planning, elimination, certification."""

try:
    from ._core import *  # noqa: F401,F403  (wheel layout: _core inside the package)
except ImportError:
    from _core import *  # noqa: F401,F403  (build-tree layout: _core on sys.path)
