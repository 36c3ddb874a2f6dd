"""Shared wire-level message types."""

from __future__ import annotations

from dataclasses import dataclass

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Twist:
    """Velocity command: linear (m/s) and angular (rad/s) components."""

    linear: Vec3 = (0.0, 0.0, 0.0)
    angular: Vec3 = (0.0, 0.0, 0.0)

    @property
    def vx(self) -> float:
        return self.linear[0]

    @property
    def wz(self) -> float:
        return self.angular[2]

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.linear + self.angular)

    def to_payload(self) -> dict:
        return {"linear": list(self.linear), "angular": list(self.angular)}

    @classmethod
    def from_payload(cls, payload: dict) -> "Twist":
        lin = payload["linear"]
        ang = payload["angular"]
        return cls(
            (float(lin[0]), float(lin[1]), float(lin[2])),
            (float(ang[0]), float(ang[1]), float(ang[2])),
        )

    @classmethod
    def planar(cls, vx: float, wz: float) -> "Twist":
        return cls((float(vx), 0.0, 0.0), (0.0, 0.0, float(wz)))


ZERO_TWIST = Twist()
