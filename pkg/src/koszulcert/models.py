"""Built-in curve/bundle models used by the CLI and the test suite.

Names: ``rational-normal(d)``, ``conic``, ``twisted-cubic``,
``cycle-genus-1(d)``, ``canonical-graph(g)``, optionally followed by
``+bridges(n)`` to attach n bridges at seeded general points.
"""

from __future__ import annotations

import random
import re

from .curves import (
    LineBundleData,
    NodalCurve,
    Node,
    PointOnCurve,
    attach_bridge,
    dualizing_bundle,
    h0,
    sample_point,
    small_rational,
    with_resampling,
)
from .errors import ModelError
from .koszul import is_base_point_free


def rational_normal(d: int, seed: int = 0) -> LineBundleData:
    if d < 1:
        raise ModelError("rational normal curves need degree >= 1")
    return LineBundleData(NodalCurve(1, (), seed), (d,))


def _distinct_points(rng: random.Random, component: int, n: int) -> list[PointOnCurve]:
    pts: list[PointOnCurve] = []
    while len(pts) < n:
        pt = PointOnCurve(component, (small_rational(rng), 1))
        if pt not in pts:
            pts.append(pt)
    return pts


def cycle_genus_1(d: int, seed: int = 0) -> LineBundleData:
    """Two P^1's meeting in two points; degrees split as evenly as possible."""
    if d < 2:
        raise ModelError("cycle-genus-1 needs degree >= 2")

    def build(s: int) -> LineBundleData:
        rng = random.Random(f"cycle:{d}:{s}")
        a, b = _distinct_points(rng, 0, 2), _distinct_points(rng, 1, 2)
        curve = NodalCurve(2, (Node(a[0], b[0]), Node(a[1], b[1])), s)
        glu = (small_rational(rng, nonzero=True), small_rational(rng, nonzero=True))
        return LineBundleData(curve, ((d + 1) // 2, d // 2), glu)

    L, _ = with_resampling(seed, build, lambda L: h0(L) == d and is_base_point_free(L))
    return L


def trivalent_graph(g: int) -> list[tuple[int, int]]:
    """A 3-connected trivalent graph with 2g - 2 vertices (K4, then prisms)."""
    if g < 3:
        raise ModelError("canonical graph curves need genus >= 3")
    if g == 3:
        return [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    n = g - 1
    edges = [(i, (i + 1) % n) for i in range(n)]
    edges += [(n + i, n + (i + 1) % n) for i in range(n)]
    edges += [(i, n + i) for i in range(n)]
    return edges


def graph_curve(edges, seed: int) -> NodalCurve:
    rng = random.Random(f"graph:{seed}")
    n = 1 + max(max(e) for e in edges)
    valence = [0] * n
    for i, j in edges:
        valence[i] += 1
        valence[j] += 1
    pts = {i: _distinct_points(rng, i, valence[i]) for i in range(n)}
    used = {i: 0 for i in range(n)}
    nodes = []
    for i, j in edges:
        nodes.append(Node(pts[i][used[i]], pts[j][used[j]]))
        used[i] += 1
        used[j] += 1
    return NodalCurve(n, tuple(nodes), seed)


def canonical_graph(g: int, seed: int = 0) -> LineBundleData:
    """A graph curve of arithmetic genus g carrying its dualizing sheaf."""
    edges = trivalent_graph(g)

    def build(s: int) -> LineBundleData:
        return dualizing_bundle(graph_curve(edges, s))

    L, _ = with_resampling(seed, build, lambda L: h0(L) == g and is_base_point_free(L))
    return L


def add_bridges(A: LineBundleData, n: int, seed: int = 0) -> LineBundleData:
    """Attach ``n`` bridges at seeded points on positive-degree components."""
    for step in range(n):
        Y = A.curve
        rng = random.Random(f"bridges:{seed}:{step}")
        comps = [i for i, d in enumerate(A.degrees) if d > 0]
        u = sample_point(Y, rng, rng.choice(comps))
        v = sample_point(Y, rng, rng.choice(comps), avoid=[u])
        _, A = attach_bridge(Y, A, u, v, seed=seed + step)
    return A


_PATTERN = re.compile(r"^([a-z0-9-]+)(?:\((\d+)\))?(?:\+bridges\((\d+)\))?$")


def builtin_model(name: str, seed: int = 0) -> LineBundleData:
    m = _PATTERN.match(name.strip())
    if not m:
        raise ModelError(f"unknown model {name!r}")
    base, arg, bridges = m.group(1), m.group(2), m.group(3)
    arg = int(arg) if arg is not None else None
    if base == "conic":
        L = rational_normal(2, seed)
    elif base == "twisted-cubic":
        L = rational_normal(3, seed)
    elif base == "rational-normal" and arg is not None:
        L = rational_normal(arg, seed)
    elif base == "cycle-genus-1" and arg is not None:
        L = cycle_genus_1(arg, seed)
    elif base == "canonical-graph" and arg is not None:
        L = canonical_graph(arg, seed)
    else:
        raise ModelError(f"unknown model {name!r}")
    if bridges:
        L = add_bridges(L, int(bridges), seed)
    return L


def model_for_cell(g: int, r: int, d: int, seed: int = 0) -> tuple[str, LineBundleData]:
    """Pick a built-in recipe realizing a (g, r, d) cell with h^1 <= 1."""
    h1 = g - d + r
    if h1 == 0 and d - g == r and r >= 1:
        name = f"rational-normal({r})" + (f"+bridges({g})" if g else "")
    elif h1 == 1 and g >= r + 1 and r >= 2:
        g0 = r + 1
        name = f"canonical-graph({g0})" + (f"+bridges({g - g0})" if g > g0 else "")
    else:
        raise ModelError(f"no built-in model for (g, r, d) = ({g}, {r}, {d}) with h^1 = {h1}")
    return name, builtin_model(name, seed)


BUILTIN_SUITE = [
    "conic",
    "twisted-cubic",
    "rational-normal(4)",
    "rational-normal(5)",
    "cycle-genus-1(3)",
    "cycle-genus-1(4)",
    "cycle-genus-1(5)",
    "canonical-graph(3)",
    "canonical-graph(4)",
    "canonical-graph(5)",
    "rational-normal(4)+bridges(1)",
    "rational-normal(4)+bridges(2)",
]

