"""Exception hierarchy.

Everything raised because of bad input data derives from :class:`DataError`
(the CLI maps these to exit code 2).
"""


class DnsObsError(Exception):
    pass


class DataError(DnsObsError, ValueError):
    def __init__(self, message="", line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidDomain(DataError):
    pass


class EmptyLabel(InvalidDomain):
    pass


class LogFormatError(DataError):
    pass


class MissingColumn(LogFormatError):
    pass


class MalformedTimestamp(LogFormatError):
    pass


class OutOfRange(DataError):
    pass


class EmptyTrace(DataError):
    pass


class EmptyDatabase(DataError):
    pass


class UnsortedInput(DataError):
    pass


class DegenerateTraining(DataError):
    pass


class EmptyEpoch(DataError):
    pass


class NotEnoughEpochs(DataError):
    pass


class EmptyStore(DataError):
    pass


class PoolExhausted(DataError):
    pass


class NotEnoughPatterns(DataError):
    pass
