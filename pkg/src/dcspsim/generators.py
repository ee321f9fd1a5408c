"""Seeded construction of the three instance families.

* ``gen_minton``       -- guaranteed-satisfiable k-coloring graphs built by
  partitioning variables into k groups and only adding cross-group edges
  (the partition itself is a witness coloring).
* ``gen_random``       -- uniformly random graphs with a fixed edge count
  m = round(d*n/2), built by rejection sampling.
* ``gen_sensor_field`` -- grid of sensors, uniformly placed targets, one
  variable per target, a constraint wherever two targets' visible-sensor
  sets intersect.

All generators are pure functions of (parameters, seed).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

from .csp import CspInstance, Kind, SENSOR_CAP


class Family(Enum):
    MINTON = "minton"
    RANDOM = "random"
    SENSOR = "sensor"


@dataclass(frozen=True)
class SensorFieldConfig:
    """Field geometry defaults: 200x200 ft, 14x16 sensor grid (224 sensors
    with half-spacing margins), 25 ft sensing range."""

    targets: int
    width: float = 200.0
    height: float = 200.0
    rows: int = 14
    cols: int = 16
    sense_range: float = 25.0
    max_retries: int = 100


@dataclass(frozen=True)
class GeneratorConfig:
    family: Family
    n: int = 0
    density: float = 0.0
    k: int = 3
    sensor: SensorFieldConfig | None = None

    def build(self, seed: int) -> CspInstance:
        if self.family is Family.MINTON:
            m = int(round(self.density * self.n))
            return gen_minton(self.n, m, self.k, seed)
        if self.family is Family.RANDOM:
            return gen_random(self.n, self.density, seed)
        assert self.sensor is not None
        return gen_sensor_field(self.sensor, seed)


def gen_minton(n: int, m: int, k: int, seed: int) -> CspInstance:
    """Satisfiable k-coloring instance with n nodes and m cross-group edges."""
    if n % k != 0:
        raise ValueError(f"n={n} not divisible by k={k}")
    size = n // k
    max_edges = (k * (k - 1) // 2) * size * size
    if m > max_edges:
        raise ValueError(f"m={m} exceeds the {max_edges} distinct cross-group pairs")
    rng = random.Random(seed)
    groups = [list(range(g * size, (g + 1) * size)) for g in range(k)]
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(edges) < m:
        g1 = rng.randrange(k)
        g2 = rng.randrange(k)
        if g1 == g2:
            continue
        u = groups[g1][rng.randrange(size)]
        v = groups[g2][rng.randrange(size)]
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)
    return CspInstance(Kind.COLORING, n, k, edges)


def gen_random(n: int, d: float, seed: int, k: int = 3) -> CspInstance:
    """Completely random k-coloring instance with m = round(d*n) edges.

    The density parameter d counts edges per node, the same scale on which
    3-colorability crosses 50% satisfiable near d = 2.3."""
    m = int(round(d * n))
    if m > n * (n - 1) // 2:
        raise ValueError(f"m={m} exceeds the {n * (n - 1) // 2} possible edges")
    rng = random.Random(seed)
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(edges) < m:
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)
    return CspInstance(Kind.COLORING, n, k, edges)


def sensor_positions(cfg: SensorFieldConfig) -> list[tuple[float, float]]:
    """Grid positions, row-major ids, half-spacing margins on all sides."""
    dx = cfg.width / cfg.cols
    dy = cfg.height / cfg.rows
    return [
        ((c + 0.5) * dx, (r + 0.5) * dy)
        for r in range(cfg.rows)
        for c in range(cfg.cols)
    ]


def gen_sensor_field(cfg: SensorFieldConfig, seed: int) -> CspInstance:
    """Sensor-allocation instance: one variable per target, visible set =
    sensors within range, constraints between targets with overlapping
    visibility.  Targets that can see no sensor are re-placed (bounded)."""
    if cfg.targets < 1:
        raise ValueError("need at least one target")
    rng = random.Random(seed)
    spots = sensor_positions(cfg)
    visible: list[tuple[int, ...]] = []
    r2 = cfg.sense_range * cfg.sense_range
    for _ in range(cfg.targets):
        for attempt in range(cfg.max_retries + 1):
            tx = rng.uniform(0.0, cfg.width)
            ty = rng.uniform(0.0, cfg.height)
            ds = tuple(
                sid for sid, (sx, sy) in enumerate(spots)
                if (sx - tx) ** 2 + (sy - ty) ** 2 <= r2
            )
            if ds:
                visible.append(ds)
                break
        else:
            raise ValueError(
                f"no visible sensors after {cfg.max_retries} placements; "
                "increase the sensing range"
            )
    edges = [
        (i, j)
        for i in range(cfg.targets)
        for j in range(i + 1, cfg.targets)
        if set(visible[i]) & set(visible[j])
    ]
    return CspInstance(Kind.SENSOR, cfg.targets, SENSOR_CAP, edges, tuple(visible))
