"""Loschmidt echo estimators.

Semiclassical dephasing representations of the Loschmidt echo with
amplitude weights, exact closed forms for quadratic Hamiltonian pairs,
and a numerically exact split-operator grid reference.

The compiled core lives in ``_loschmidt``. Installed builds ship it inside
this package; development builds locate it on ``sys.path`` (the test harness
points that at the CMake build tree).
"""

try:
    from ._loschmidt import *          # noqa: F401,F403  (installed layout)
    from ._loschmidt import __version__  # noqa: F401
except ImportError:  # pragma: no cover - build-tree layout
    from _loschmidt import *           # noqa: F401,F403
    from _loschmidt import __version__  # noqa: F401
