"""Exception types shared by all pipeline stages.

Every error carries a short machine-readable ``category`` so the CLI can
emit a single parseable failure line; plain ``ValueError`` is reserved for
bad call arguments and maps to the "invalid-argument" category.
"""


class PipelineError(Exception):
    category = "internal"


class SchemaMismatchError(PipelineError):
    category = "schema-mismatch"


class EmptyInputError(PipelineError):
    category = "empty-input"


class InvalidSpecError(PipelineError):
    category = "invalid-spec"


class UnknownLabelError(PipelineError):
    category = "unknown-label"


class ConfigError(PipelineError):
    """Run-configuration validation failure listing every violated field."""

    category = "config-validation"

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DegenerateTrainingWarning(UserWarning):
    """Training data contains a single class; the model will predict it."""
