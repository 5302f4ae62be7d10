"""Reference component behaviors for the AEB event chain.

Each class follows the generated-submodule contract: one ``execute`` method
taking the component's inputs as keyword arguments and returning a dict
keyed by the declared output names.
"""
from __future__ import annotations

from .sim import braking_decision, ttc_calculate


class ObjectDetection:
    # the world already publishes the shortest obstacle distance on the lidar topic
    def execute(self, point_cloud):
        return {"obstacle_distance": point_cloud}


class TTC_Calculation:
    def execute(self, obstacle_distance, ego_speed):
        return {"ttc": ttc_calculate(max(obstacle_distance, 0.0), ego_speed)}


class Braking_Decision:
    """Stateful: once engaged, the brake force never drops below its peak.

    The stateless ramp releases the brake as partial braking lengthens the
    TTC, which leaves the ego creeping toward the obstacle.
    """

    def __init__(self):
        self.peak = 0.0

    def execute(self, ttc):
        self.peak = max(self.peak, braking_decision(ttc))
        return {"brake_force": self.peak}


class StatelessBrakingDecision:
    def execute(self, ttc):
        return {"brake_force": braking_decision(ttc)}


class Carla_Vehicle_Control:
    def execute(self, brake_force):
        return {"brake_cmd": min(max(brake_force, 0.0), 1.0)}


REFERENCE_BEHAVIORS = {
    "ObjectDetection": ObjectDetection,
    "TTC_Calculation": TTC_Calculation,
    "Braking_Decision": Braking_Decision,
    "Carla_Vehicle_Control": Carla_Vehicle_Control,
}
