"""Desk-scale solver for the momentum-cutoff Dirac vacuum.

Subpackages are imported lazily so the CLI can cap BLAS thread pools
before any linear algebra library loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "lattice",
    "dirac",
    "coulomb",
    "states",
    "energy",
    "spectral",
    "scf",
    "pairprod",
    "invariants",
    "config",
    "io",
    "cli",
)

__all__ = list(_SUBMODULES) + ["__version__"]


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
