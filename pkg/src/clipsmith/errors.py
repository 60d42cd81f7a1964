"""Exception hierarchy shared across the pipeline."""


class ClipsmithError(Exception):
    """Base class for all pipeline errors."""


# --- timestamps / cut-lists ---------------------------------------------

class InvalidTimestamp(ClipsmithError):
    pass


class TimeParseError(ClipsmithError):
    def __init__(self, raw: str, message: str = ""):
        self.raw = raw
        super().__init__(message or f"unparseable time value: {raw!r}")


class InvalidTimeRange(ClipsmithError):
    pass


class EmptyCutList(ClipsmithError):
    pass


class CutListInvalid(ClipsmithError):
    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


# --- media / transcoder --------------------------------------------------

class UnsupportedFormat(ClipsmithError):
    pass


class ProbeFailed(ClipsmithError):
    pass


class ExtractionFailed(ClipsmithError):
    pass


class NoAudioStream(ClipsmithError):
    pass


class ToolTimeout(ClipsmithError):
    pass


class ToolNotFound(ClipsmithError):
    pass


# --- transcription ---------------------------------------------------------

class BackendUnavailable(ClipsmithError):
    pass


class EmptyTranscript(ClipsmithError):
    pass


# --- selection -------------------------------------------------------------

class SelectionParseError(ClipsmithError):
    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class EmptySelection(ClipsmithError):
    pass


class PreconditionViolated(ClipsmithError):
    pass


# --- cut & merge -------------------------------------------------------------

class InvalidSegment(ClipsmithError):
    pass


class ClipEncodeFailed(ClipsmithError):
    pass


class ConcatFailed(ClipsmithError):
    pass


class ReframeFailed(ClipsmithError):
    pass


# --- metrics -----------------------------------------------------------------

class UndefinedMetric(ClipsmithError):
    pass


# --- job service ----------------------------------------------------------

class JobCreateFailed(ClipsmithError):
    pass


class InvalidTransition(ClipsmithError):
    pass


class EditRejected(ClipsmithError):
    pass


class ArtifactNotFound(ClipsmithError):
    pass


class ArtifactNotReady(ClipsmithError):
    pass
