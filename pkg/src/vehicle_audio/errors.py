"""Exception hierarchy shared by every stage of the toolkit."""


class VehicleAudioError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(VehicleAudioError, ValueError):
    pass


class DecodeError(VehicleAudioError):
    pass


class UnsupportedFormat(VehicleAudioError):
    pass


class ManifestError(VehicleAudioError):
    """Raised for malformed manifest rows; ``problems`` lists every offending row."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [message])


class SplitError(VehicleAudioError):
    def __init__(self, message, offenders=None):
        super().__init__(message)
        self.offenders = list(offenders or [])


class SubsampleError(VehicleAudioError):
    pass


class TrainingError(VehicleAudioError):
    """Non-finite loss during training; carries the layer and batch that produced it."""

    def __init__(self, message, layer=None, batch_index=None):
        super().__init__(message)
        self.layer = layer
        self.batch_index = batch_index
