class DimensionMismatchError(ValueError):
    pass


class NonFiniteTensorError(ValueError):
    pass


class DegenerateNormalizationError(ZeroDivisionError):
    pass


class OracleSizeError(ValueError):
    pass


class ConfigValidationError(ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = {"non_field_errors": [errors]}
        self.errors = errors
        super().__init__(
            "; ".join(
                f"{field}: {', '.join(messages)}" for field, messages in errors.items()
            )
        )


class CheckpointFormatError(ValueError):
    pass


class TruncationBudgetExceeded(RuntimeError):
    def __init__(self, order, weight, threshold):
        self.order = order
        self.weight = weight
        self.threshold = threshold
        super().__init__(
            f"Cumulative discarded weight {weight:.3e} exceeds {threshold:.3e} "
            f"at order {order}"
        )
