"""Exception types shared across the package."""


class SonosimError(Exception):
    """Base class for all domain errors raised by this package."""


class GeometryInfeasible(SonosimError):
    """No lesion placement satisfying the margin constraints was found."""


class GridOutOfBounds(SonosimError):
    """Requested image grid extends beyond the imaged region."""


class EmptyInput(SonosimError):
    """An operation received an empty image."""


class PadTooLarge(SonosimError):
    """Mirror padding amount is too large for the image size."""


class ShapeMismatch(SonosimError):
    """Two arrays that must share a shape do not."""


class MissingMask(SonosimError):
    """An image file has no companion mask file."""


class NonBinaryMask(SonosimError):
    """A mask file contains values other than {0, 255}."""


class CorpusValidationError(SonosimError):
    """One or more image/mask pairs failed ingest validation.

    ``problems`` is a list of ``(pair_id, error)`` tuples, one per
    offending pair, so callers can report every defect at once.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = ", ".join(f"{pid}: {err}" for pid, err in self.problems)
        super().__init__(f"{len(self.problems)} invalid pair(s): {lines}")


class KTooLarge(SonosimError):
    """Requested more cross-validation folds than pool entries."""


class NTooLarge(SonosimError):
    """Requested subsample larger than the training split."""
