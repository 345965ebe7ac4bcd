"""Mixed local–nonlocal singular elliptic problems: solver and comparison checks.

Submodules are imported lazily so that the command-line entry point can cap
BLAS threads (``MIXSING_THREADS``) before numpy loads.
"""

__version__ = "0.1.0"
