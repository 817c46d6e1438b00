"""Exception types shared across the package."""


class PcaesError(Exception):
    pass


class InvalidMatrix(PcaesError, ValueError):
    pass


class DimensionMismatch(PcaesError, ValueError):
    pass


class DimensionTooSmall(PcaesError, ValueError):
    pass


class DimensionTooSmallForPca(DimensionTooSmall):
    pass


class DegenerateData(PcaesError, ValueError):
    pass


class UnknownFunction(PcaesError, KeyError):
    pass


class InvalidInput(PcaesError, ValueError):
    pass


class EmptyCell(PcaesError, ValueError):
    pass


class ReportError(PcaesError, OSError):
    pass


class MalformedTraces(PcaesError, ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row
