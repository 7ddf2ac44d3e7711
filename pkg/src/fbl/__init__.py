"""Finite-blocklength rates for the pure-loss bosonic channel.

Submodules:

* :mod:`fbl.distmath` - thermal spectra, surprisal moments, normal CDF
* :mod:`fbl.specinf` - exact spectral inf-entropy and Berry-Esseen brackets
* :mod:`fbl.rates` - second-order rates, receiver comparisons, DT bound
* :mod:`fbl.focksim` - truncated Fock-space simulation of SRM decoding
* :mod:`fbl.cli` - the ``fbl`` command
"""

from importlib import resources

__version__ = "0.1.0"


def schema_path(name: str):
    """Path-like handle to a JSON schema shipped with the package."""
    return resources.files("fbl") / "schemas" / f"{name}.schema.json"
