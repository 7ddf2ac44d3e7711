"""Exception hierarchy shared by the library and the CLI."""


class FBLError(Exception):
    """Base class for all errors raised by :mod:`fbl`."""


class DomainError(FBLError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class TruncationError(FBLError):
    """A Fock-space truncation lost more norm than the declared tolerance."""


class SupportExplosionError(FBLError):
    """Exact convolution would exceed the configured support-size guard."""


class DegenerateCodewordError(FBLError):
    """A codeword has zero overlap with the projector it is normalized onto."""


class ConfigError(FBLError, ValueError):
    """A CLI config file is malformed; the message names the offending field."""
