class ValidationError(ValueError):
    """
    Raised when a validator fails to validate the given data.
    """

    ...


class DegenerateInputError(ValidationError):
    """
    Raised when Dirac locations coincide, or a master component sits on its own
    reflection through the prescribed mean.
    """

    ...


class MomentRangeError(ValidationError):
    """
    Raised when moment counting is requested beyond the supported N, M range.
    """

    ...


class UnboundedProblemError(ValueError):
    """
    Raised when the entropy objective has no finite maximum, e.g. a single
    component without a diameter cap.
    """

    ...


class NonFiniteObjectiveError(ArithmeticError):
    """
    Raised when an objective evaluates to NaN or infinity at a point the solver
    has to accept.
    """

    ...


class UnknownPresetError(KeyError):
    """
    Raised when an experiment preset name is not known.
    """

    ...
