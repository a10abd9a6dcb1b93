"""Exception types shared across the package."""


class WindclfError(Exception):
    """Base class for errors raised by this package."""


class ParseError(WindclfError, ValueError):
    """A CSV row could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class IntegrityError(WindclfError, ValueError):
    """Dataset violates a structural invariant (e.g. non-monotone timestamps)."""


class DegenerateSignalError(WindclfError, ValueError):
    """A signal is constant, so min-max scaling is undefined."""

    def __init__(self, signal: str):
        super().__init__(f"signal {signal!r} is constant; min-max range is degenerate")
        self.signal = signal


class SchemaError(WindclfError, ValueError):
    """Required signals or columns are missing from a dataset."""


class ConfigError(WindclfError, ValueError):
    """Invalid configuration (profile fields, CLI config files)."""


class InsufficientDataError(WindclfError, ValueError):
    """An operation received an empty or too-small dataset."""


class VocabularyError(WindclfError, ValueError):
    """Label vocabularies cannot be reconciled."""


class AlignmentQualityError(WindclfError, RuntimeError):
    """Alignment fit objective exceeded the configured ceiling."""

    def __init__(self, farm_id: str, objective: float, ceiling: float):
        super().__init__(
            f"alignment for farm {farm_id!r} is degenerate: "
            f"objective {objective:.4f} exceeds ceiling {ceiling:.4f}"
        )
        self.farm_id = farm_id
        self.objective = objective
        self.ceiling = ceiling
