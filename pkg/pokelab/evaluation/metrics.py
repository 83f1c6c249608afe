from __future__ import annotations
import math
from ..exceptions import MetricError
from ..sim.geometry import Pose

MIN_INITIAL_DISTANCE = 1e-9


def relative_location_error(final: Pose, goal: Pose, initial: Pose) -> float:
    """|final - goal| / |initial - goal| over object centers."""
    start = math.hypot(initial.cx - goal.cx, initial.cy - goal.cy)
    if start <= MIN_INITIAL_DISTANCE:
        raise MetricError("initial pose coincides with the goal; relative error undefined")
    return math.hypot(final.cx - goal.cx, final.cy - goal.cy) / start


def pose_error(final: Pose, goal: Pose) -> float:
    """Angle between the two long axes in degrees, folded into [0, 90]."""
    diff = math.degrees(abs(final.theta - goal.theta)) % 180.0
    return min(diff, 180.0 - diff)
