"""Exception types raised by the toolkit.

Every error derives from :class:`VktError` and exposes a stable ``name``
(the class name) that the CLI and language bindings use to identify the
failure across process boundaries.
"""


class VktError(Exception):
    """Base class for all toolkit errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class InvalidArgument(VktError):
    """An argument violates a documented precondition."""


class IndexOutOfRange(VktError):
    """A cell index lies outside the volume."""


class AllocationFailure(VktError):
    """The destination memory space cannot hold the requested bytes."""


class UnresolvedHandle(VktError):
    """A resource handle does not resolve to a live object."""


class EmptyVolume(VktError):
    """The operation needs a non-empty volume."""


class EmptyRange(VktError):
    """The region of interest selects no cells."""


class RangeOutOfBounds(VktError):
    """The region of interest extends past the volume bounds."""


class NotASlab(VktError):
    """Delete needs a region spanning the full extent on exactly two axes."""


class DimsMismatch(VktError):
    """Operand volumes disagree in dimensions or value mapping."""


class EvenKernelDims(VktError):
    """Convolution kernels must have odd extent on every axis."""


class BadMagic(VktError):
    """The stream does not start with the expected magic bytes."""


class TruncatedPayload(VktError):
    """The stream ends before the header-implied byte count."""


class UnknownFormatCode(VktError):
    """The header carries an unrecognized data-format code."""


class IoFailure(VktError):
    """A read, write, or flush failed, or the source lacks the capability."""


class SizeMismatch(VktError):
    """Raw payload length disagrees with the requested geometry."""


class NotSeekable(VktError):
    """Range I/O needs a seekable data source."""


class UnresolvedLut(VktError):
    """The render state references a lookup table that is not live."""


class NoIsoValues(VktError):
    """Iso-surface rendering needs at least one iso value."""
