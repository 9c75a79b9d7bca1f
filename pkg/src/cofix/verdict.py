from __future__ import annotations

from dataclasses import dataclass

PASS = "pass"
FAIL = "fail"
ERROR = "error"

THEOREM_BACKED = "theorem-backed"


def bounded(height: int) -> str:
    return f"bounded({height})"


@dataclass(frozen=True)
class Verdict:
    """Outcome of a check.  A failing verdict names where and which clause."""

    status: str
    location: str | None = None
    condition: str | None = None
    detail: str = ""
    confidence: str = THEOREM_BACKED

    def __post_init__(self):
        if self.status not in (PASS, FAIL, ERROR):
            raise ValueError(f"bad verdict status {self.status!r}")
        if self.status == FAIL and (self.location is None or self.condition is None):
            raise ValueError("a failing verdict must carry a location and a condition")

    @property
    def ok(self) -> bool:
        return self.status == PASS

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def passed(cls, detail: str = "", confidence: str = THEOREM_BACKED) -> "Verdict":
        return cls(PASS, detail=detail, confidence=confidence)

    @classmethod
    def failed(cls, location: str, condition: str, detail: str = "",
               confidence: str = THEOREM_BACKED) -> "Verdict":
        return cls(FAIL, str(location), condition, detail, confidence)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "location": self.location,
            "condition": self.condition,
            "detail": self.detail,
            "confidence": self.confidence,
        }
