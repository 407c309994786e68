"""Exception hierarchy shared by the whole package.

The CLI maps each class to a distinct exit code, so new failure modes
should subclass one of these rather than raising bare ValueError.
"""


class ForestRulesError(Exception):
    """Base class for all errors raised by this package."""


class ModelFormatError(ForestRulesError):
    """A model file could not be parsed as the documented JSON schema."""


class ModelValidationError(ForestRulesError):
    """A parsed model violates a structural invariant.

    The message names the first violated invariant and the offending
    node id, so exporter bugs can be located without a debugger.
    """


class DataError(ForestRulesError):
    """A dataset file or row is malformed (reported with row number)."""


class ContradictionError(ForestRulesError):
    """A branch constrains a feature to an empty region.

    Correct training never produces such a branch, so this signals a
    corrupt or mis-exported model rather than a user error.
    """


class InfeasibleSearchError(ForestRulesError):
    """No searched parameter vector satisfied a hard constraint."""


class FitnessEvaluationError(ForestRulesError):
    """A fitness callback raised; carries the offending parameters."""

    def __init__(self, params, cause):
        super().__init__(f"fitness evaluation failed at params {list(params)}: {cause}")
        self.params = params
