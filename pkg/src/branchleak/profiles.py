"""Operational capture conditions under which a session is recorded.

A profile bundles the machine/network attributes that can plausibly
shift traffic shape (OS, platform, time of day, link type, browser) plus
free-form behavioral metadata that is carried around as opaque strings
and never analysed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ValidationError

OS_VALUES = ("Windows", "Linux", "Mac")
PLATFORM_VALUES = ("Desktop", "Laptop")
TRAFFIC_VALUES = ("Morning", "Noon", "Night")
CONNECTION_VALUES = ("Wired", "Wireless")
BROWSER_VALUES = ("Chrome", "Firefox")

BEHAVIORAL_KEYS = ("age_group", "gender", "political_alignment", "state_of_mind")
UNDISCLOSED = "Undisclosed"


def _default_behavioral() -> dict[str, str]:
    return {key: UNDISCLOSED for key in BEHAVIORAL_KEYS}


@dataclass(frozen=True)
class OperationalProfile:
    os: str = "Linux"
    platform: str = "Desktop"
    traffic_condition: str = "Morning"
    connection: str = "Wired"
    browser: str = "Chrome"
    behavioral: tuple[tuple[str, str], ...] = field(
        default_factory=lambda: tuple(sorted(_default_behavioral().items()))
    )

    def __post_init__(self):
        checks = (
            ("os", self.os, OS_VALUES),
            ("platform", self.platform, PLATFORM_VALUES),
            ("traffic_condition", self.traffic_condition, TRAFFIC_VALUES),
            ("connection", self.connection, CONNECTION_VALUES),
            ("browser", self.browser, BROWSER_VALUES),
        )
        for name, value, allowed in checks:
            if value not in allowed:
                raise ValidationError(f"profile {name}={value!r} not in {allowed}")

    def operational_key(self) -> str:
        """Canonical string of the operational attributes only."""
        return "|".join(
            (self.os, self.platform, self.traffic_condition, self.connection, self.browser)
        )

    def to_obj(self) -> dict:
        return {
            "os": self.os,
            "platform": self.platform,
            "traffic_condition": self.traffic_condition,
            "connection": self.connection,
            "browser": self.browser,
            "behavioral": dict(self.behavioral),
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "OperationalProfile":
        behavioral = obj.get("behavioral", _default_behavioral())
        return cls(
            os=obj["os"],
            platform=obj["platform"],
            traffic_condition=obj["traffic_condition"],
            connection=obj["connection"],
            browser=obj["browser"],
            behavioral=tuple(sorted((str(k), str(v)) for k, v in behavioral.items())),
        )


def default_profiles() -> list[OperationalProfile]:
    """Cross-product of all operational attribute values (72 profiles).

    Behavioral attributes stay undisclosed; synthetic corpora cycle
    through this list so every condition combination gets coverage.
    """
    return [
        OperationalProfile(os=o, platform=p, traffic_condition=t, connection=c, browser=b)
        for o, p, t, c, b in itertools.product(
            OS_VALUES, PLATFORM_VALUES, TRAFFIC_VALUES, CONNECTION_VALUES, BROWSER_VALUES
        )
    ]
