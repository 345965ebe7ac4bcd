"""Exception hierarchy shared by every module.

Each error carries a short machine-readable ``code`` and the CLI exit status
it maps to (0 pass, 1 check failure, 2 invalid input, 3 nonconvergence).
"""


class MixsingError(Exception):
    code = "error"
    exit_status = 1

    def __init__(self, message, *, code=None, report=None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.report = report


class InvalidInput(MixsingError):
    code = "invalid-input"
    exit_status = 2


class HypothesisViolation(InvalidInput):
    code = "hypothesis-violation"


class NonConvergence(MixsingError):
    code = "nonconvergence"
    exit_status = 3


class MonotonicityViolation(MixsingError):
    code = "monotonicity-violation"
    exit_status = 2


class SchemeFidelityError(MixsingError):
    code = "scheme-fidelity"
    exit_status = 1
