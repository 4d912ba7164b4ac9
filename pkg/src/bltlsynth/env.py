"""Planar workspace model: labeled rectangular regions and the initial pose.

Regions are axis-aligned rectangles with pairwise-disjoint interiors (shared
edges are allowed).  Every region carries exactly one proposition label; one
designated proposition marks the unsafe regions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dynamics import Pose


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self!r}")

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def interior_overlaps(self, other: "Rect") -> bool:
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)


@dataclass(frozen=True)
class Region:
    """One labeled region of interest."""

    name: str
    label: str
    rect: Rect


@dataclass(frozen=True)
class Environment:
    """Workspace bounds, regions, proposition set, and the initial pose.

    Immutable after construction; safe to share across parallel samplers.
    """

    regions: tuple[Region, ...]
    propositions: frozenset[str]
    unsafe: str
    initial_pose: Pose
    bounds: Rect

    def __post_init__(self):
        if self.unsafe not in self.propositions:
            raise ValueError(f"unsafe proposition {self.unsafe!r} not in proposition set")
        for reg in self.regions:
            if reg.label not in self.propositions:
                raise ValueError(f"region {reg.name!r} has unknown proposition {reg.label!r}")
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise ValueError("region names must be unique")
        for i, a in enumerate(self.regions):
            for b in self.regions[i + 1:]:
                if a.rect.interior_overlaps(b.rect):
                    raise ValueError(f"regions overlap: {a.name!r} and {b.name!r}")
        p = self.initial_pose
        if not self.bounds.contains_point(p.x, p.y):
            raise ValueError("initial pose lies outside the workspace bounds")
        for reg in self.regions:
            if reg.label == self.unsafe and reg.rect.contains_point(p.x, p.y):
                raise ValueError(f"initial pose lies inside unsafe region {reg.name!r}")

    def unsafe_regions(self) -> tuple[Region, ...]:
        return tuple(r for r in self.regions if r.label == self.unsafe)


def satisfying_set(env: Environment, prop: str) -> list[Region]:
    """All regions labeled with prop (possibly none)."""
    if prop not in env.propositions:
        raise ValueError(f"unknown proposition {prop!r}")
    return [r for r in env.regions if r.label == prop]


def environment_from_dict(doc: dict) -> Environment:
    """Build and validate an Environment from a parsed document."""
    try:
        props = frozenset(str(p) for p in doc["propositions"])
        unsafe = str(doc["unsafe"])
        x, y, theta = (float(v) for v in doc["q_init"])
        bx0, by0, bx1, by1 = (float(v) for v in doc["bounds"])
        regions = tuple(
            Region(name=str(r["id"]), label=str(r["label"]),
                   rect=Rect(*(float(v) for v in r["rect"])))
            for r in doc["regions"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValueError) and exc.args and "rectangle" in str(exc):
            raise
        raise ValueError(f"malformed environment document: {exc}") from exc
    return Environment(regions=regions, propositions=props, unsafe=unsafe,
                       initial_pose=Pose(x, y, theta),
                       bounds=Rect(bx0, by0, bx1, by1))


def load_environment(text: str) -> Environment:
    """Parse an environment document (JSON) and validate all invariants."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"environment document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("environment document must be a JSON object")
    return environment_from_dict(doc)
