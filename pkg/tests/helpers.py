import random
from fractions import Fraction

from koszulcert.curves import LineBundleData, NodalCurve, Node, PointOnCurve, small_rational


def random_curve(rng: random.Random, max_genus: int = 4, max_components: int = 4) -> NodalCurve:
    """Random connected nodal curve without self-nodes and with p_a <= max_genus."""
    m = rng.randint(1, max_components)
    used = {i: set() for i in range(m)}

    def point(i):
        while True:
            if rng.random() < 0.2:
                coords = (Fraction(1), Fraction(0))
            else:
                coords = (small_rational(rng), Fraction(1))
            pt = PointOnCurve(i, coords)
            if pt.coords not in used[i]:
                used[i].add(pt.coords)
                return pt

    nodes = [Node(point(i), point(rng.randrange(i))) for i in range(1, m)]
    if m > 1:
        for _ in range(rng.randint(0, max_genus)):
            i, j = rng.sample(range(m), 2)
            nodes.append(Node(point(i), point(j)))
    return NodalCurve(m, tuple(nodes), rng.randint(0, 10**6))


def random_bundle(rng: random.Random, curve: NodalCurve, lo: int = -2, hi: int = 4) -> LineBundleData:
    return LineBundleData(
        curve,
        tuple(rng.randint(lo, hi) for _ in range(curve.n_components)),
        tuple(small_rational(rng, nonzero=True) for _ in curve.nodes),
    )


def two_cycle(gluings=(2, 3), degrees=(0, 0)) -> LineBundleData:
    c = NodalCurve(2, (
        Node(PointOnCurve(0, (0, 1)), PointOnCurve(1, (0, 1))),
        Node(PointOnCurve(0, (1, 0)), PointOnCurve(1, (1, 1))),
    ))
    return LineBundleData(c, degrees, gluings)
