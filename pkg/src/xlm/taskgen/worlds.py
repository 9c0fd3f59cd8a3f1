"""Procedural grid worlds: connected passable regions with two spawn slots."""

from __future__ import annotations

import random

from ..env.geometry import flood_fill, row_major_key
from ..env.types import GridWorld
from .params import GenParams, GenerationError


def sample_world(seed: int, params: GenParams = GenParams()) -> GridWorld:
    """Deterministic in seed. The passable region is always connected: cells
    outside the largest component are filled in rather than resampled, so
    every seed yields a world."""
    rng = random.Random(("world", seed).__repr__())
    for attempt in range(32):
        w = rng.randint(*params.size_range)
        h = rng.randint(*params.size_range)
        walls = {
            (x, y)
            for y in range(h)
            for x in range(w)
            if rng.random() < params.wall_density
        }
        passable = {(x, y) for y in range(h) for x in range(w)} - walls
        if not passable:
            continue
        components = []
        remaining = set(passable)
        while remaining:
            start = min(remaining, key=row_major_key)
            comp = flood_fill(start, remaining)
            components.append(comp)
            remaining -= comp
        main = max(components, key=lambda c: (len(c), -row_major_key(min(c, key=row_major_key))[0]))
        if len(main) < params.min_free_cells:
            continue
        walls = {(x, y) for y in range(h) for x in range(w)} - main
        cells = sorted(main, key=row_major_key)
        s0 = rng.choice(cells)
        s1 = rng.choice([c for c in cells if c != s0])
        return GridWorld(
            width=w,
            height=h,
            walls=frozenset(walls),
            spawn_points=((s0, 0), (s1, 1)),
        )
    raise GenerationError(f"could not sample a world for seed {seed}")
