"""Exception and warning types.

Every error carries an ``exit_code`` used by the command-line front end:
1 for bad input, 3 for numerical failures.
"""


class RobustIISError(Exception):
    exit_code = 3


class InputError(RobustIISError, ValueError):
    exit_code = 1


class DegenerateSeriesError(RobustIISError, ValueError):
    """A series has zero variance, so its autocorrelation is undefined."""


class EmptyOverlapError(RobustIISError):
    """Every importance weight is zero for the requested target."""


class InitializationError(RobustIISError):
    pass


class AccuracyError(RobustIISError):
    pass


class EmptySetError(RobustIISError):
    exit_code = 1


class StuckError(RobustIISError):
    pass


class SupportDeficiencyWarning(UserWarning):
    """The proposal posterior does not cover the target's support."""


class AccuracyWarning(UserWarning):
    pass


class MonotonicityWarning(UserWarning):
    pass
