"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all package errors."""


# geometry
class DegenerateInput(LabError):
    """6D rotation columns are (near-)parallel or zero."""


class InvalidPose(LabError):
    pass


class UnreachableTarget(LabError):
    """Head pose target outside the gimbal envelope."""


# dataspace
class EmptyEpisode(LabError):
    pass


class BadJointCount(LabError):
    pass


class UnsortedBoundaries(LabError):
    pass


class SchemaViolation(LabError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VersionMismatch(LabError):
    pass


# world / beliefs
class ZeroEvidence(LabError):
    """Observation has zero likelihood under every hypothesis."""


class UnknownEntity(LabError):
    pass


# policy / training
class EmptyDataset(LabError):
    pass


class WrongSourceTag(LabError):
    """Training stage fed episodes from the wrong data source."""


class ShapeMismatch(LabError):
    pass


# runtime / metrics
class StepCapExceeded(LabError):
    pass


class EmptyTrials(LabError):
    pass


class MissingMarkers(LabError):
    pass


# gateway
class ProtocolError(LabError):
    def __init__(self, code, message):
        self.code = code
        super().__init__(f"{code}: {message}")


class EmptyRecording(LabError):
    pass
