"""Harness exception types."""


class HarnessError(Exception):
    """Base class for harness errors."""


class ShapeChainViolation(HarnessError):
    """A layer's output shape deviates from the architecture's shape chain."""


class WeightShapeMismatch(HarnessError):
    """Pretrained weights do not match the model being initialized."""


class DataError(HarnessError):
    """A manifest entry could not be read or decoded."""
