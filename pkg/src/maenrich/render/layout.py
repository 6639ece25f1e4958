"""Seeded Fruchterman-Reingold layout and a convex hull helper."""

from __future__ import annotations

import math

import numpy as np

from maenrich.render.svg import XorShift64Star

FR_ITERATIONS = 500
GRAVITY = 1.0


def fruchterman_reingold(
    n: int,
    edges: list[tuple[int, int, float]],
    *,
    seed: int = 42,
    iterations: int = FR_ITERATIONS,
    gravity: float = GRAVITY,
) -> np.ndarray:
    """Positions in the unit square for ``n`` nodes.

    FR forces: repulsion ``k^2/d`` between all pairs, attraction
    ``w d^2/k`` along edges, displacement capped by a temperature that
    cools linearly from 0.1 to 0. A weak pull toward the centroid keeps
    disconnected components from drifting apart; the result is rescaled
    to fill the unit square. Initial placement draws x then y per node
    from xorshift64*.
    """
    if n == 0:
        return np.zeros((0, 2))
    rng = XorShift64Star(seed)
    pos = np.array([[rng.random(), rng.random()] for _ in range(n)])
    if n == 1:
        return np.array([[0.5, 0.5]])
    A = np.zeros((n, n))
    for i, j, w in edges:
        A[i, j] += w
        A[j, i] += w
    k = math.sqrt(1.0 / n)
    t0 = 0.1
    x, y = pos[:, 0].copy(), pos[:, 1].copy()
    eye = np.eye(n, dtype=bool)
    for it in range(iterations):
        temp = t0 * (1.0 - it / iterations)
        dx = x[:, None] - x[None, :]
        dy = y[:, None] - y[None, :]
        d2 = np.maximum(dx * dx + dy * dy, 1e-8)
        # force magnitude over distance: k^2/d^2 (repulsion) - w d/k (attraction)
        f = k * k / d2 - A * np.sqrt(d2) / k
        f[eye] = 0.0
        ux = (dx * f).sum(axis=1)
        uy = (dy * f).sum(axis=1)
        ux -= gravity * (x - x.mean())
        uy -= gravity * (y - y.mean())
        length = np.maximum(np.sqrt(ux * ux + uy * uy), 1e-9)
        scale = np.minimum(length, temp) / length
        x = x + ux * scale
        y = y + uy * scale
    pos = np.column_stack([x, y])
    pos -= pos.min(axis=0)
    extent = pos.max()
    if extent > 0:
        pos /= extent
    pos += (1.0 - pos.max(axis=0)) / 2  # center the shorter axis
    return pos


def convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew's monotone chain; counter-clockwise, no repeated endpoint."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]
