"""Spin chains on spheres: sampling, Langevin dynamics, relaxation times."""

try:
    from ._spinchain import *  # noqa: F401,F403  (installed package layout)
    from ._spinchain import __version__  # noqa: F401
except ImportError:  # in-tree test layout: extension on PYTHONPATH
    from _spinchain import *  # noqa: F401,F403
    from _spinchain import __version__  # noqa: F401
