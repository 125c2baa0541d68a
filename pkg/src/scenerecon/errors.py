"""Exception hierarchy shared by all pipeline stages.

Every error carries a ``category`` used by the CLI to pick its exit code:
``usage`` -> 1, ``data`` -> 2, ``numerical`` -> 3.
"""


class SceneReconError(Exception):
    category = "data"


class UsageError(SceneReconError):
    category = "usage"


class DataError(SceneReconError):
    category = "data"


class NumericalError(SceneReconError):
    category = "numerical"


# geometry
class NonPositiveDepth(NumericalError):
    pass


class DegenerateBaseline(NumericalError):
    pass


class BehindCamera(NumericalError):
    pass


# features
class ImageTooSmall(DataError):
    pass


class EmptyInput(DataError):
    pass


class InsufficientMatches(DataError):
    pass


class NoConsensus(NumericalError):
    pass


# keyframing
class EmptySequence(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# sfm
class DegeneratePair(NumericalError):
    pass


class InsufficientTracks(DataError):
    pass


class RegistrationFailed(NumericalError):
    pass


class InitializationFailed(NumericalError):
    pass


class BadParameters(UsageError):
    pass


# bundle
class SingularNormalEquations(NumericalError):
    pass


# cloud
class MalformedHeader(DataError):
    pass


class TruncatedBody(DataError):
    pass


class CloudTooSmall(DataError):
    pass


class TooFewCorrespondences(DataError):
    pass


class DegenerateConfiguration(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyCloud(DataError):
    pass


# scene
class SchemaVersionMismatch(DataError):
    pass


class ParseError(DataError):
    pass


# synth
class TooFewEntities(DataError):
    pass
