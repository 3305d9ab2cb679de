"""Optimization models: direction handling, max-min scaling, meta-objectives, dominance.

Three models are supported. The single-objective model minimizes the
direction-converted target alone. The plain bi-objective model (PMO) minimizes
the (target, auxiliary) pair as equals. The meta bi-objective model (MMO)
minimizes g1 = ft + w*phi(fa) and g2 = ft - w*phi(fa): the target stays primary
while configurations with dissimilar auxiliary values become incomparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .measurement import MeasurementRecord

ObjectivePoint = tuple[float, ...]

MMO_SHAPES = ("linear", "sqrt", "square")

PMO = "pmo"


def to_minimization(record: MeasurementRecord) -> tuple[float, float]:
    """Direction-convert raw values: maximizing objectives are negated."""
    target = record.target_raw
    auxiliary = record.auxiliary_raw
    if record.target_direction == "maximize":
        target = -target
    if record.auxiliary_direction == "maximize":
        auxiliary = -auxiliary
    return target, auxiliary


class NormalizationBounds:
    """Running per-objective min/max of converted values seen so far in one run.

    Bounds only widen; they are updated dynamically as the tuning proceeds.
    ``revision`` increments whenever an update actually widened a bound, so
    callers can cheaply detect staleness of previously normalized values.
    """

    def __init__(self, objectives: int = 2):
        self.mins = [math.inf] * objectives
        self.maxs = [-math.inf] * objectives
        self.revision = 0

    def observe(self, point: tuple[float, ...]) -> None:
        changed = False
        for i, value in enumerate(point):
            if value < self.mins[i]:
                self.mins[i] = value
                changed = True
            if value > self.maxs[i]:
                self.maxs[i] = value
                changed = True
        if changed:
            self.revision += 1

    def normalize(self, value: float, objective: int) -> float:
        """Max-min scale into [0, 1]; a degenerate range maps to 0.5.

        The value must already be covered by the bounds (observe first).
        """
        lo = self.mins[objective]
        hi = self.maxs[objective]
        assert lo <= value <= hi, f"value {value} outside bounds [{lo}, {hi}]"
        if lo == hi:
            return 0.5
        return (value - lo) / (hi - lo)


@dataclass(frozen=True)
class MmoInstance:
    """One meta-model instance: the balance shape and its weight w > 0."""

    shape: str
    weight: float

    def __post_init__(self) -> None:
        if self.shape not in MMO_SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {MMO_SHAPES}")
        if not self.weight > 0:
            raise ValueError(f"weight must be > 0, got {self.weight}")

    def phi(self, fa_norm: float) -> float:
        """Weighted balance term applied to the normalized auxiliary value."""
        if self.shape == "linear":
            return self.weight * fa_norm
        if self.shape == "sqrt":
            return self.weight * math.sqrt(fa_norm)
        return self.weight * fa_norm * fa_norm


def meta_objectives(
    instance: MmoInstance, ft_norm: float, fa_norm: float
) -> ObjectivePoint:
    """Meta pair (ft + w*phi(fa), ft - w*phi(fa)) from normalized inputs."""
    balance = instance.phi(fa_norm)
    return (ft_norm + balance, ft_norm - balance)


def pmo_objectives(ft_norm: float, fa_norm: float) -> ObjectivePoint:
    """The plain bi-objective pair: target and auxiliary minimized as equals."""
    return (ft_norm, fa_norm)


def dominance(u: ObjectivePoint, v: ObjectivePoint) -> int:
    """Pareto comparison: 1 if u dominates v, -1 if v dominates u, 0 otherwise.

    u dominates v iff u <= v componentwise with at least one strict inequality;
    equal points are mutually nondominated.
    """
    if len(u) != len(v):
        raise ValueError(f"objective length mismatch: {len(u)} vs {len(v)}")
    u_better = False
    v_better = False
    for a, b in zip(u, v):
        if a < b:
            u_better = True
        elif b < a:
            v_better = True
    if u_better and not v_better:
        return 1
    if v_better and not u_better:
        return -1
    return 0


def dominates(u: ObjectivePoint, v: ObjectivePoint) -> bool:
    return dominance(u, v) == 1


def pareto_front(points: list[ObjectivePoint]) -> list[int]:
    """Indices of the points dominated by no other point in the set."""
    if not points:
        raise ValueError("pareto_front needs at least one point")
    front: list[int] = []
    for i, p in enumerate(points):
        if not any(dominance(q, p) == 1 for j, q in enumerate(points) if j != i):
            front.append(i)
    return front
