"""Seeded test geometries shared by the verification suites, tests and notebooks."""
from __future__ import annotations

import math

import numpy as np

from .lattice import LatticeSet, ball_set, connected_components, repair_count, translate


def _disk_union(centers, radii, h: float, d: int) -> LatticeSet:
    out = LatticeSet.empty(d, h)
    for c, r in zip(centers, radii):
        out = out | ball_set(np.asarray(c, dtype=float), float(r), h, d)
    return out


def _largest_component(S: LatticeSet) -> LatticeSet:
    comps = connected_components(S)
    return max(comps, key=lambda c: (c.count, c.key()))


def random_blob(rng: np.random.Generator, h: float, diameter_cells: float = 30.0, d: int = 2,
                lobes: tuple[int, int] = (3, 6)) -> LatticeSet:
    """Connected union of overlapping disks whose extent along some axis is at
    least ``diameter_cells`` cells.

    Disk centers follow a random walk with steps shorter than the disk radii,
    so consecutive disks overlap; the largest component is kept anyway.
    """
    target = diameter_cells * h
    for _ in range(100):
        k = int(rng.integers(lobes[0], lobes[1] + 1))
        radii = rng.uniform(0.18, 0.32, size=k) * target
        centers = [np.zeros(d)]
        for i in range(1, k):
            step = rng.normal(size=d)
            step *= 0.8 * min(radii[i - 1], radii[i]) / np.linalg.norm(step)
            centers.append(centers[-1] + step)
        S = _largest_component(_disk_union(centers, radii, h, d))
        c = S.cropped()
        if max(c.shape) >= diameter_cells:
            return S
        # stretch the chain until it spans the requested diameter
        scale = diameter_cells / max(c.shape)
        S = _largest_component(_disk_union([x * scale for x in centers], radii * math.sqrt(scale), h, d))
        if max(S.cropped().shape) >= diameter_cells:
            return S
    raise RuntimeError("could not draw a blob of the requested diameter")


def multi_blob(rng: np.random.Generator, h: float, n_blobs: int, diameter_cells: float = 12.0,
               separation: float = 2.5, d: int = 2) -> LatticeSet:
    """``n_blobs`` random blobs spaced ``separation`` diameters apart along a ring."""
    out = LatticeSet.empty(d, h)
    ring = separation * diameter_cells * h * n_blobs / (2 * math.pi)
    for i in range(n_blobs):
        B = random_blob(rng, h, diameter_cells, d, lobes=(2, 4))
        ang = 2 * math.pi * i / n_blobs
        target = np.zeros(d)
        target[0], target[1] = ring * math.cos(ang), ring * math.sin(ang)
        shift = np.rint((target - B.centroid()) / h).astype(np.int64)
        out = out | translate(B, shift)
    return out


def ball_with_satellite(h: float, radius: float, gamma: float, distance: float, d: int = 2,
                        angle: float = 0.0) -> tuple[LatticeSet, LatticeSet, LatticeSet]:
    """Ball ``G1`` about the origin and a compact satellite ``G2`` with
    ``|G2| = round(gamma |G1|)`` cells centered ``distance`` away.

    Returns ``(G, G1, G2)``.
    """
    G1 = ball_set(np.full(d, 0.5 * h), radius, h, d)
    n2 = max(1, int(round(gamma * G1.count)))
    c = np.zeros(d)
    c[0], c[1 % d] = distance * math.cos(angle), distance * math.sin(angle) if d > 1 else 0.0
    c = (np.floor(c / h) + 0.5) * h
    seed = ball_set(c, (n2 * h ** d / math.pi) ** (1 / d) if d == 2 else h, h, d)
    if seed.is_empty():
        seed = LatticeSet.from_cells([np.floor(c / h).astype(int)], h, d)
    G2 = repair_count(seed, n2, forbidden=G1)
    if (G1 & G2).count:
        raise ValueError("satellite overlaps the ball")
    return G1 | G2, G1, G2


def perturbed_disk(h: float, radius: float, amplitude: float, lobes: int = 5) -> LatticeSet:
    """Star-shaped set ``rho(theta) <= radius (1 + amplitude cos(lobes theta))`` in the plane."""
    R = radius * (1 + abs(amplitude))
    n = int(math.ceil(R / h)) + 1
    ax = (np.arange(-n, n) + 0.5) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    rho = np.hypot(X, Y)
    occ = rho <= radius * (1 + amplitude * np.cos(lobes * np.arctan2(Y, X)))
    return LatticeSet(occ, h, (-n, -n)).cropped()
