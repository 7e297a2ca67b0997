"""Seeded synthetic graph generators for tests, demonstrations and benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .graphstore import AttributedGraph, Split, khop_ball


def erdos_renyi(n: int, p: float, seed: int, *, directed=False, num_features=8,
                num_classes=3) -> AttributedGraph:
    """G(n, p) with Gaussian features and uniformly random labels."""
    rng = np.random.default_rng(seed)
    nxg = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)), directed=directed)
    feats = rng.normal(size=(n, num_features))
    labels = rng.integers(0, num_classes, size=n)
    return AttributedGraph(n, list(nxg.edges()), feats, labels, directed=directed,
                           num_classes=num_classes, name=f"er-{n}-{p}")


def homophilous_sbm(n: int, num_classes: int, seed: int, *, p_in=0.25, p_out=0.02,
                    num_features=16, signal=1.0) -> AttributedGraph:
    """Stochastic block model whose blocks are the classes.

    Features are a class-specific Gaussian mean of norm ``signal`` plus unit noise.
    """
    rng = np.random.default_rng(seed)
    sizes = np.full(num_classes, n // num_classes)
    sizes[: n % num_classes] += 1
    probs = np.full((num_classes, num_classes), p_out)
    np.fill_diagonal(probs, p_in)
    nxg = nx.stochastic_block_model(sizes.tolist(), probs.tolist(), seed=int(rng.integers(2**31)))
    labels = np.repeat(np.arange(num_classes), sizes)
    means = rng.normal(size=(num_classes, num_features))
    means *= signal / np.linalg.norm(means, axis=1, keepdims=True)
    feats = means[labels] + rng.normal(size=(n, num_features))
    return AttributedGraph(n, list(nxg.edges()), feats, labels, num_classes=num_classes,
                           name=f"sbm-{n}")


def barabasi_albert(n: int, m: int, seed: int, *, num_features=32,
                    num_classes=4) -> AttributedGraph:
    """Preferential-attachment graph with random features and labels."""
    rng = np.random.default_rng(seed)
    nxg = nx.barabasi_albert_graph(n, m, seed=int(rng.integers(2**31)))
    feats = rng.normal(size=(n, num_features))
    labels = rng.integers(0, num_classes, size=n)
    return AttributedGraph(n, list(nxg.edges()), feats, labels, num_classes=num_classes,
                           name=f"ba-{n}-{m}")


# ------------------------------------------------- mirrored structural roles

HOME, DISTANT = 0, 1


@dataclass
class MirrorScenario:
    graph: AttributedGraph
    split: Split
    mirror: int          # held-out node with the distant class's structure and attributes
    home_class: int      # class of the labelled nodes around the mirror
    distant_class: int   # class whose labelled examples lie far from the mirror


class _Builder:
    def __init__(self, width, rng, noise):
        self.width, self.rng, self.noise = width, rng, noise
        self.feats, self.labels, self.edges = [], [], []

    def node(self, color, label):
        x = self.rng.normal(scale=self.noise, size=self.width)
        x[color] += 1.0
        self.feats.append(x)
        self.labels.append(label)
        return len(self.labels) - 1

    def link(self, u, v):
        self.edges.append((u, v))


def mirrored_roles(seed: int, *, home_units=40, near_units=4, far_units=20, bridge=3,
                   noise_dims=6, noise=0.1) -> MirrorScenario:
    """Two classes defined by attributed motifs, with a mirror node far from its class.

    The home class consists of stars whose nodes carry colour 0.  The distant
    class consists of triangles.  Triangles near the labelled distant nodes use
    colour 1 only; triangles further away mix colour 1 with colour 2.  The
    mirror node sits in a colour-2 triangle attached to the home region, more
    than two hops from every labelled node.  Colour 2 never occurs within two
    hops of a labelled node, so a two-layer encoder trained on labels alone
    receives no gradient about it.

    The home region is deliberately the larger one: corrupted motif instances
    draw their members uniformly, so most negatives come from the home class
    and the motif objective pulls colour 2 towards colour 1 rather than away
    from both.
    """
    rng = np.random.default_rng(seed)
    b = _Builder(3 + noise_dims, rng, noise)
    home_c, near_c, mix_c = 0, 1, 2

    hubs = []
    for _ in range(home_units):
        h = b.node(home_c, HOME)
        for _ in range(2):
            b.link(h, b.node(home_c, HOME))
        if hubs:
            b.link(hubs[-1], h)
        hubs.append(h)

    def triangle(colors, label):
        tri = [b.node(c, label) for c in colors]
        b.link(tri[0], tri[1])
        b.link(tri[1], tri[2])
        b.link(tri[0], tri[2])
        return tri

    near = []
    for _ in range(near_units):
        tri = triangle([near_c] * 3, DISTANT)
        if near:
            b.link(near[-1][2], tri[0])
        near.append(tri)
    far = []
    prev = near[-1][2]
    for _ in range(bridge):  # unlabelled spacer path
        s = b.node(near_c, DISTANT)
        b.link(prev, s)
        prev = s
    for _ in range(far_units):
        colors = [near_c, mix_c, mix_c] if rng.random() < 0.5 else [near_c, near_c, mix_c]
        tri = triangle(list(rng.permutation(colors)), DISTANT)
        b.link(prev, tri[0])
        prev = tri[2]
        far.append(tri)
    # connect the regions through a spacer path so the graph stays connected
    prev = hubs[0]
    for _ in range(bridge):
        s = b.node(home_c, HOME)
        b.link(prev, s)
        prev = s
    b.link(prev, near[0][0])

    mirror_tri = triangle([mix_c] * 3, DISTANT)
    mirror = mirror_tri[0]
    b.link(mirror, hubs[-1])
    b.link(mirror, hubs[-1] + 1)  # a leaf of the last hub

    n = len(b.labels)
    labels = np.array(b.labels)
    g = AttributedGraph(n, b.edges, np.array(b.feats), labels, num_classes=2,
                        name=f"mirror-{seed}")
    # labelled home nodes: hubs at least three hops from the mirror triangle
    blocked = set(khop_ball(g, mirror_tri, 2).tolist())
    home_train = [h for h in hubs[:-2] if h not in blocked][: max(2, home_units // 2)]
    near_nodes = [v for tri in near for v in tri]
    train = np.array(sorted(home_train + near_nodes[::2]))
    ball = set(khop_ball(g, train, 2).tolist())
    mix_nodes = np.flatnonzero(np.asarray(g.features)[:, mix_c] > 0.5)
    if ball & set(mix_nodes.tolist()):
        raise AssertionError("generator placed colour-2 nodes inside the labelled two-hop ball")
    val = np.array(sorted(set(near_nodes[1::2]) | set(hubs[1:-2:2]) - set(train.tolist())))
    used = set(train.tolist()) | set(val.tolist())
    test = np.array([v for v in range(n) if v not in used])
    split = Split(train, val, test, seed, len(train) / n)
    return MirrorScenario(g, split, mirror, HOME, DISTANT)
