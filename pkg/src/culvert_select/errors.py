"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end, so
codes stay stable per error class:

====  ==========================================
code  class
====  ==========================================
1     unexpected failure (not a CulvertError)
2     command line usage (argparse)
3     InputError and subclasses (frames, files)
4     ParseError (config files)
5     GeometryError and subclasses
6     InvalidConfig (scene / selection invariants)
====  ==========================================
"""


class CulvertError(Exception):
    exit_code = 1


class InputError(CulvertError):
    exit_code = 3


class EmptySequence(InputError):
    pass


class DimensionMismatch(InputError, ValueError):
    pass


class SizeMismatch(DimensionMismatch):
    pass


class DecodeError(InputError):
    pass


class TooSmall(InputError, ValueError):
    pass


class CountMismatch(InputError, ValueError):
    pass


class TooManyLevels(CulvertError, ValueError):
    exit_code = 3


class BorderViolation(CulvertError, ValueError):
    exit_code = 3


class ParseError(CulvertError, ValueError):
    exit_code = 4

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class GeometryError(CulvertError):
    exit_code = 5


class DegenerateInput(GeometryError, ValueError):
    pass


class NoConsensus(GeometryError):
    pass


class PairRejected(GeometryError):
    pass


class TooFewPoints(GeometryError, ValueError):
    pass


class DegenerateConfiguration(GeometryError, ValueError):
    pass


class InvalidConfig(CulvertError, ValueError):
    exit_code = 6
