from typing import Any, Dict, Optional


class FreeSenseError(Exception):
    """Root of every error raised by the package."""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def to_payload(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "error": type(self).__name__,
            "message": self.message,
            "stage": self.stage,
        }
        return payload


class DomainError(FreeSenseError, ValueError):
    pass


class TraceFormatError(FreeSenseError):
    def __init__(self, message: str, offset: int, stage: Optional[str] = None):
        super().__init__(f"{message} (byte offset {offset})", stage=stage)
        self.offset = offset

    def to_payload(self) -> Dict[str, Any]:
        payload = super().to_payload()
        payload["offset"] = self.offset
        return payload


class ConfigError(FreeSenseError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message, stage="config")
        self.key = key

    def to_payload(self) -> Dict[str, Any]:
        payload = super().to_payload()
        payload["key"] = self.key
        return payload


class StageError(FreeSenseError):
    """Wraps a failure with the pipeline stage it came from."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(str(cause), stage=stage)
        self.cause = cause

    def to_payload(self) -> Dict[str, Any]:
        if isinstance(self.cause, FreeSenseError):
            payload = self.cause.to_payload()
            payload["stage"] = self.stage
            return payload
        payload = super().to_payload()
        payload["error"] = type(self.cause).__name__
        return payload
