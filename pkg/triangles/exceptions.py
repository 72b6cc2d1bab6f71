"""Errors raised by the triangle counting library."""


class TrianglesError(Exception):
    """Base class for every error raised by the library."""


class InvalidEdge(TrianglesError, ValueError):
    """An edge violates a precondition (self-loops reach ``edge_key``)."""


class MalformedLine(TrianglesError):
    def __init__(self, path, line_no: int, content: str):
        self.path = path
        self.line_no = line_no
        self.content = content
        super().__init__(f"{path}:{line_no}: malformed line {content!r}")


class GraphIOError(TrianglesError):
    """Reading or writing a graph (or spill) file failed."""


class InfeasibleSpec(TrianglesError, ValueError):
    """A generator request that no simple graph can satisfy."""


class ConfigError(TrianglesError, ValueError):
    pass


class ProtocolViolation(TrianglesError):
    """A stage received an event its phase cannot accept, or a channel was misused."""


class ChannelAborted(TrianglesError):
    """A blocked stage was woken up because another stage of the run failed."""


class PipelineTimeout(TrianglesError):
    pass


class InvariantViolation(TrianglesError):
    """An engine produced a result that breaks one of its arithmetic invariants."""
