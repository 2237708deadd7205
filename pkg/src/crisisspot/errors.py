"""Exception hierarchy shared by every module.

Each class carries a short machine-parsable ``category`` and the process
exit code the CLI maps it to (2 usage, 3 data, 4 numeric).
"""


class CrisisSpotError(Exception):
    category = "error"
    exit_code = 1


class ParameterError(CrisisSpotError, ValueError):
    category = "parameter"
    exit_code = 2


class DataError(CrisisSpotError):
    category = "data"
    exit_code = 3


class ShapeError(DataError, ValueError):
    category = "shape"


class LabelError(DataError, ValueError):
    category = "label"


class ResolutionError(DataError, FileNotFoundError):
    category = "resolution"


class FormatError(DataError):
    category = "format"


class NumericError(CrisisSpotError, ArithmeticError):
    category = "numeric"
    exit_code = 4
