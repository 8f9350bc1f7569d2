"""Benchmark instances: standard device catalogs and seeded synthetic
networks of the sizes used throughout the evaluation.

Synthetic networks are rings with random chords, so they are 2-edge-connected
(every demand admits a link-disjoint backup). Demands connect edge-node pairs
and the largest-value subset of the target size is kept, mirroring how real
traffic matrices are trimmed.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .model import DeviceCatalog
from .sndlib import (ProblemInstance, RawDemand, RawLink, RawNode,
                     RawSndInstance, core_edge_split, select_largest_demands)

__all__ = [
    "CHASSIS_CAPACITY",
    "CHASSIS_POWER",
    "CATALOGS",
    "catalog",
    "synthetic_instance",
    "INSTANCE_CLASSES",
    "make_instance",
    "random_tiny_instance",
]

# One chassis model shared by all catalogs; the card families differ.
CHASSIS_CAPACITY = 16000.0
CHASSIS_POWER = 86.4

_CARD_FAMILIES = {
    "alfa": (400.0, 6.8),
    "delta": (155.0, 18.6),
    "eta": (1000.0, 7.3),
}

CATALOGS: dict[str, DeviceCatalog] = {
    name: DeviceCatalog(
        name=name,
        chassis_capacity=CHASSIS_CAPACITY,
        chassis_power=CHASSIS_POWER,
        card_capacity=cap,
        card_power=power,
    )
    for name, (cap, power) in _CARD_FAMILIES.items()
}


def catalog(name: str, **overrides) -> DeviceCatalog:
    """A standard catalog, optionally with experiment parameters overridden
    (utilization thresholds, cards per link, activation settings)."""
    try:
        base = CATALOGS[name]
    except KeyError:
        raise KeyError(f"unknown catalog {name!r}; choose from "
                       f"{sorted(CATALOGS)}") from None
    return replace(base, **overrides) if overrides else base


# ---------------------------------------------------------------------------
# Synthetic networks
# ---------------------------------------------------------------------------

# (nodes, undirected links, demands) for each size class
INSTANCE_CLASSES: dict[str, tuple[int, int, int]] = {
    "ring12": (12, 18, 15),
    "ring17": (17, 26, 21),
    "ring28": (28, 41, 90),
}


def synthetic_instance(name: str, n_nodes: int, n_links: int, n_demands: int,
                       seed: int, value_range: tuple[float, float] = (50.0, 400.0),
                       ) -> RawSndInstance:
    """A seeded ring-plus-chords network with demands between edge-node pairs.

    The ring guarantees 2-edge-connectivity; chords are distinct non-ring node
    pairs. Demand values are uniform in ``value_range``.
    """
    if n_links < n_nodes:
        raise ValueError("need at least as many links as nodes for a ring")
    max_links = n_nodes * (n_nodes - 1) // 2
    if n_links > max_links:
        raise ValueError("more links than node pairs")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7E57)))
    ids = [f"n{i:02d}" for i in range(n_nodes)]
    order = list(range(n_nodes))
    rng.shuffle(order)
    ring = {frozenset((order[i], order[(i + 1) % n_nodes])) for i in range(n_nodes)}
    pairs = sorted({frozenset((i, j)) for i in range(n_nodes)
                    for j in range(i + 1, n_nodes)} - ring,
                   key=lambda p: sorted(p))
    extra_count = n_links - n_nodes
    chosen_extra = [pairs[k] for k in
                    rng.choice(len(pairs), size=extra_count, replace=False)] \
        if extra_count else []
    links = []
    for li, pair in enumerate(sorted(ring | set(chosen_extra), key=lambda p: sorted(p))):
        a, b = sorted(pair)
        links.append(RawLink(f"l{li:03d}", ids[a], ids[b]))

    _, edge = core_edge_split(ids, seed)
    edge_sorted = sorted(edge)
    demands = []
    di = 0
    for i in range(len(edge_sorted)):
        for j in range(i + 1, len(edge_sorted)):
            value = float(rng.uniform(*value_range))
            demands.append(RawDemand(f"d{di:03d}", edge_sorted[i],
                                     edge_sorted[j], round(value, 2)))
            di += 1
    if len(demands) < n_demands:
        raise ValueError(
            f"only {len(demands)} edge-pair demands available, "
            f"{n_demands} requested")
    subset = select_largest_demands(demands, n_demands)
    nodes = tuple(RawNode(i) for i in ids)
    return RawSndInstance(name, nodes, tuple(links), tuple(subset))


def make_instance(class_name: str, catalog_name: str = "eta",
                  seed: int = 7) -> ProblemInstance:
    """A ProblemInstance of one of the standard size classes."""
    try:
        n_nodes, n_links, n_demands = INSTANCE_CLASSES[class_name]
    except KeyError:
        raise KeyError(f"unknown instance class {class_name!r}; choose from "
                       f"{sorted(INSTANCE_CLASSES)}") from None
    raw = synthetic_instance(f"{class_name}-s{seed}", n_nodes, n_links,
                             n_demands, seed)
    return ProblemInstance.from_raw(raw, catalog_name, n_demands, seed)


def random_tiny_instance(rng: np.random.Generator, max_nodes: int = 4,
                         max_demands: int = 2) -> RawSndInstance:
    """A small random connected network for solver cross-checks: a ring over
    3..max_nodes nodes plus up to one chord, and 1..max_demands demands."""
    n = int(rng.integers(3, max_nodes + 1))
    ids = [f"n{i}" for i in range(n)]
    links = [RawLink(f"l{i}", ids[i], ids[(i + 1) % n]) for i in range(n)]
    if n >= 4 and rng.random() < 0.5:
        links.append(RawLink(f"l{n}", ids[0], ids[2]))
    n_dem = int(rng.integers(1, max_demands + 1))
    demands = []
    for k in range(n_dem):
        o, t = rng.choice(n, size=2, replace=False)
        demands.append(RawDemand(f"d{k}", ids[o], ids[t],
                                 float(rng.integers(50, 350))))
    return RawSndInstance(f"tiny{n}", tuple(RawNode(i) for i in ids),
                          tuple(links), tuple(demands))
