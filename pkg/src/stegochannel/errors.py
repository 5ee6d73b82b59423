"""Exception taxonomy shared by the codec, channel, stego engine and harness."""


class StegoChannelError(Exception):
    """Base class for every domain error raised by this package."""


class MalformedStream(StegoChannelError):
    """Truncated or structurally invalid JPEG data."""


class UnsupportedCoding(StegoChannelError):
    """Valid JPEG that uses a coding mode outside baseline sequential Huffman."""


class FormatRejected(StegoChannelError):
    """The channel profile does not accept the declared upload format."""


class EmptyInput(StegoChannelError):
    pass


class NotConverged(StegoChannelError):
    """Carrier preparation ran out of iterations.

    The partial result is attached so callers can still use it.
    """

    def __init__(self, message, image=None, report=None):
        super().__init__(message)
        self.image = image
        self.report = report


class PayloadTooLarge(StegoChannelError):
    pass


class DimensionMismatch(StegoChannelError):
    pass


class NoNonzeroCoefficients(StegoChannelError):
    pass


class InsufficientCorpus(StegoChannelError):
    pass


class EmptyRecords(StegoChannelError):
    pass
