# tdec_coordination/errors.py
"""
Exception types raised across the pipeline.
The CLI maps these to exit codes (see cli.py).
"""


class TdecError(Exception):
    """Base class for every pipeline error."""


class FormatError(TdecError, ValueError):
    def __init__(self, message, row=None, column=None):
        if row is not None:
            where = f"row {row}" if column is None else f"row {row}, column {column}"
            message = f"{message} ({where})"
        super().__init__(message)
        self.row = row
        self.column = column


class InsufficientLengthError(TdecError, ValueError):
    def __init__(self, required, actual):
        super().__init__(f"segment has {actual} samples, embedding needs at least {required}")
        self.required = required
        self.actual = actual


class DegenerateChannelError(TdecError, ValueError):
    def __init__(self, channel, lag):
        super().__init__(f"channel '{channel}' has zero variance at lag {lag} samples")
        self.channel = channel
        self.lag = lag


class NumericalError(TdecError, ArithmeticError):
    pass


class DegenerateFeatureError(TdecError, ValueError):
    def __init__(self, feature):
        super().__init__(f"feature {feature} has zero variance")
        self.feature = feature


class FoldError(TdecError):
    def __init__(self, subject, message=None):
        super().__init__(message or f"training split without subject '{subject}' holds a single class")
        self.subject = subject


class AlignmentError(TdecError):
    def __init__(self, missing):
        # missing: {modality: [(subject_id, segment_id), ...]}
        parts = []
        for modality in sorted(missing):
            keys = ", ".join(f"{s}/{g}" for s, g in missing[modality])
            parts.append(f"{modality} missing [{keys}]")
        super().__init__("modalities are not aligned: " + "; ".join(parts))
        self.missing = missing


class ConvergenceWarning(UserWarning):
    pass
