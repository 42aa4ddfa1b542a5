"""Nodal curves with rational components and line bundles on them.

Every component is a copy of P^1 with homogeneous coordinates (s:t).  A line
bundle is given by one degree per component and one nonzero gluing scalar per
node.  A global section is a tuple of binary forms ``(f_1, ..., f_m)``,
``f_i`` of degree ``d_i``, such that ``f_i(a) = lambda_n * f_j(b)`` at every
node ``n`` joining branch ``a`` on component ``i`` to branch ``b`` on
component ``j``.

A binary form of degree d is stored as its coefficient list ``c`` with
``c[k]`` the coefficient of ``s^(d-k) t^k``.  Forms of negative degree are the
empty list.  The value of a form at a point (a:b) is its evaluation at the
representative with b = 1, or at (1, 0) when b = 0; all gluing scalars are
relative to this trivialization.

Sections of a bundle live in the "ambient" vector space obtained by
concatenating the coefficient lists of all components.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import InconclusiveError, ModelError
from .linalg import RatMatrix, as_rat, kernel_with_free_columns, rank, rat_to_str

T = TypeVar("T")

MAX_RESAMPLE = 32


def normalize_point(a, b) -> tuple[Fraction, Fraction]:
    a, b = as_rat(a), as_rat(b)
    if b:
        return (a / b, Fraction(1))
    if not a:
        raise ModelError("(0:0) is not a point of P^1")
    return (Fraction(1), Fraction(0))


@dataclass(frozen=True)
class PointOnCurve:
    component: int
    coords: tuple[Fraction, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "coords", normalize_point(*self.coords))

    @property
    def is_infinity(self) -> bool:
        return not self.coords[1]

    def to_json(self) -> list:
        return [self.component, [rat_to_str(c) for c in self.coords]]

    @classmethod
    def from_json(cls, data) -> "PointOnCurve":
        ci, (a, b) = data
        return cls(int(ci), (as_rat(a), as_rat(b)))


@dataclass(frozen=True)
class Node:
    branch_a: PointOnCurve
    branch_b: PointOnCurve


@dataclass(frozen=True)
class NodalCurve:
    n_components: int
    nodes: tuple[Node, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        self.validate()

    def validate(self) -> None:
        if self.n_components < 1:
            raise ModelError("a curve needs at least one component")
        seen = set()
        for n in self.nodes:
            for br in (n.branch_a, n.branch_b):
                if not 0 <= br.component < self.n_components:
                    raise ModelError(f"branch on nonexistent component {br.component}")
                key = (br.component, br.coords)
                if key in seen:
                    raise ModelError(f"two node branches share the point {br.coords} on component {br.component}")
                seen.add(key)
            if n.branch_a.component == n.branch_b.component:
                raise ModelError("self-nodes are not supported")
        if not self._connected():
            raise ModelError("dual graph is not connected")

    def _connected(self) -> bool:
        adj = {i: set() for i in range(self.n_components)}
        for n in self.nodes:
            i, j = n.branch_a.component, n.branch_b.component
            adj[i].add(j)
            adj[j].add(i)
        stack, seen = [0], {0}
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n_components

    @property
    def genus(self) -> int:
        """Arithmetic genus #nodes - #components + 1."""
        return len(self.nodes) - self.n_components + 1

    def branches(self, component: int) -> list[PointOnCurve]:
        out = []
        for n in self.nodes:
            for br in (n.branch_a, n.branch_b):
                if br.component == component:
                    out.append(br)
        return out

    def valence(self, component: int) -> int:
        return len(self.branches(component))

    def is_smooth_point(self, pt: PointOnCurve) -> bool:
        if not 0 <= pt.component < self.n_components:
            return False
        return all(br.coords != pt.coords for br in self.branches(pt.component))


@dataclass(frozen=True)
class LineBundleData:
    curve: NodalCurve
    degrees: tuple[int, ...]
    gluings: tuple[Fraction, ...] = field(default=None)

    def __post_init__(self):
        degs = tuple(int(d) for d in self.degrees)
        glu = self.gluings
        if glu is None:
            glu = (Fraction(1),) * len(self.curve.nodes)
        glu = tuple(as_rat(x) for x in glu)
        object.__setattr__(self, "degrees", degs)
        object.__setattr__(self, "gluings", glu)
        if len(degs) != self.curve.n_components:
            raise ModelError("one degree per component is required")
        if len(glu) != len(self.curve.nodes):
            raise ModelError("one gluing scalar per node is required")
        if any(not x for x in glu):
            raise ModelError("gluing scalars must be nonzero")

    @property
    def degree(self) -> int:
        return sum(self.degrees)

    def tensor(self, other: "LineBundleData") -> "LineBundleData":
        if other.curve != self.curve:
            raise ModelError("bundles live on different curves")
        return LineBundleData(
            self.curve,
            tuple(a + b for a, b in zip(self.degrees, other.degrees)),
            tuple(a * b for a, b in zip(self.gluings, other.gluings)),
        )

    __mul__ = tensor

    def power(self, k: int) -> "LineBundleData":
        return LineBundleData(
            self.curve,
            tuple(k * d for d in self.degrees),
            tuple(g ** k for g in self.gluings),
        )

    def inverse(self) -> "LineBundleData":
        return self.power(-1)

    def rescaled(self, factors: Sequence) -> "LineBundleData":
        """Isomorphic bundle obtained by scaling the trivialization on each component."""
        glu = []
        for n, lam in zip(self.curve.nodes, self.gluings):
            glu.append(lam * as_rat(factors[n.branch_a.component]) / as_rat(factors[n.branch_b.component]))
        return LineBundleData(self.curve, self.degrees, tuple(glu))


def trivial_bundle(curve: NodalCurve) -> LineBundleData:
    return LineBundleData(curve, (0,) * curve.n_components)


# --- binary forms -----------------------------------------------------------


def monomial_values(d: int, pt: PointOnCurve) -> list[Fraction]:
    """Values of s^(d-k) t^k, k = 0..d, at ``pt``."""
    if d < 0:
        return []
    a, b = pt.coords
    if not b:
        return [Fraction(1)] + [Fraction(0)] * d
    out = [Fraction(1)] * (d + 1)
    for k in range(d - 1, -1, -1):
        out[k] = out[k + 1] * a
    return out


def eval_form(coeffs: Sequence, pt: PointOnCurve) -> Fraction:
    return sum((c * m for c, m in zip(coeffs, monomial_values(len(coeffs) - 1, pt))), Fraction(0))


def mul_forms(f: Sequence, g: Sequence, target_degree: int) -> list[Fraction]:
    out = [Fraction(0)] * max(target_degree + 1, 0)
    if not f or not g:
        return out
    for i, a in enumerate(f):
        if a:
            for j, b in enumerate(g):
                if b:
                    out[i + j] += a * b
    return out


def linear_form_vanishing_at(pt: PointOnCurve) -> list[Fraction]:
    a, b = pt.coords
    if not b:
        return [Fraction(0), Fraction(1)]  # t
    return [Fraction(1), -a]  # s - a t


# --- section spaces -----------------------------------------------------------


def _offsets(degrees: Sequence[int]) -> list[int]:
    offs, pos = [], 0
    for d in degrees:
        offs.append(pos)
        pos += max(d + 1, 0)
    offs.append(pos)
    return offs


def evaluation_row(bundle: LineBundleData, pt: PointOnCurve) -> dict:
    offs = _offsets(bundle.degrees)
    vals = monomial_values(bundle.degrees[pt.component], pt)
    return {offs[pt.component] + k: v for k, v in enumerate(vals) if v}


def node_constraint_matrix(bundle: LineBundleData) -> RatMatrix:
    offs = _offsets(bundle.degrees)
    rows = []
    for node, lam in zip(bundle.curve.nodes, bundle.gluings):
        row: dict = {}
        for k, v in evaluation_row(bundle, node.branch_a).items():
            row[k] = row.get(k, 0) + v
        for k, v in evaluation_row(bundle, node.branch_b).items():
            row[k] = row.get(k, 0) - lam * v
        rows.append(row)
    return RatMatrix(len(rows), offs[-1], rows)


class SectionBasis:
    """A basis of a space of global sections, as ambient coefficient vectors.

    The basis comes from an exact kernel computation, so basis vector ``i``
    has a 1 at ambient position ``free[i]`` and a 0 at every other free
    position; coordinates of any section in the span are read off there.
    """

    def __init__(self, bundle: LineBundleData, points: tuple[PointOnCurve, ...],
                 vectors: Sequence[Sequence[Fraction]], free: Sequence[int]):
        self.bundle = bundle
        self.points = tuple(points)
        self.vectors = tuple(tuple(v) for v in vectors)
        self.free = tuple(free)
        self.offsets = _offsets(bundle.degrees)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return len(self.vectors)

    @property
    def ambient_dim(self) -> int:
        return self.offsets[-1]

    def forms(self, i: int) -> tuple[tuple[Fraction, ...], ...]:
        return split_forms(self.bundle, self.vectors[i])

    def coordinates(self, vec: Sequence, check: bool = True) -> list[Fraction]:
        coords = [vec[f] for f in self.free]
        if check:
            recon = [Fraction(0)] * self.ambient_dim
            for c, v in zip(coords, self.vectors):
                if c:
                    for k, x in enumerate(v):
                        if x:
                            recon[k] += c * x
            if list(recon) != list(vec):
                raise AssertionError("vector does not lie in the section space")
        return coords

    def values_at(self, pt: PointOnCurve) -> list[Fraction]:
        """Image of ``pt`` under the map given by this basis."""
        row = evaluation_row(self.bundle, pt)
        return [sum((v[k] * x for k, x in row.items()), Fraction(0)) for v in self.vectors]

    def __repr__(self) -> str:
        return f"SectionBasis(dim={self.dim}, degrees={self.bundle.degrees}, points={len(self.points)})"


def split_forms(bundle: LineBundleData, vec: Sequence) -> tuple[tuple[Fraction, ...], ...]:
    offs = _offsets(bundle.degrees)
    return tuple(tuple(vec[offs[i]:offs[i + 1]]) for i in range(bundle.curve.n_components))


def join_forms(forms: Sequence[Sequence]) -> list[Fraction]:
    out: list[Fraction] = []
    for f in forms:
        out.extend(as_rat(x) for x in f)
    return out


@lru_cache(maxsize=4096)
def _section_space(bundle: LineBundleData, points: tuple[PointOnCurve, ...]) -> SectionBasis:
    cons = node_constraint_matrix(bundle)
    rows = [cons.row(i) for i in range(cons.nrows)]
    rows += [evaluation_row(bundle, p) for p in points]
    m = RatMatrix(len(rows), cons.ncols, rows)
    vectors, free = kernel_with_free_columns(m)
    return SectionBasis(bundle, points, vectors, free)


def h0_basis(bundle: LineBundleData) -> SectionBasis:
    """Basis of H^0 of the bundle: the kernel of the node constraints."""
    return _section_space(bundle, ())


def h0(bundle: LineBundleData) -> int:
    return h0_basis(bundle).dim


def twist_down(bundle: LineBundleData, pts: Iterable[PointOnCurve]) -> SectionBasis:
    """Sections of ``bundle`` vanishing at the given smooth points."""
    pts = tuple(pts)
    for p in pts:
        if not bundle.curve.is_smooth_point(p):
            raise ModelError(f"{p} is not a smooth point of the curve")
    return _section_space(bundle, pts)


def multiply(a: Sequence, bundle_a: LineBundleData, b: Sequence, bundle_b: LineBundleData) -> list[Fraction]:
    """Componentwise product of a section of ``bundle_a`` and one of ``bundle_b``."""
    target = bundle_a.tensor(bundle_b)
    fa, fb = split_forms(bundle_a, a), split_forms(bundle_b, b)
    out: list[Fraction] = []
    for f, g, d in zip(fa, fb, target.degrees):
        out.extend(mul_forms(f, g, d))
    return out


def satisfies_constraints(bundle: LineBundleData, vec: Sequence) -> bool:
    return not any(node_constraint_matrix(bundle).apply(list(vec)))


# --- points and the bundles O(p) -----------------------------------------------


def point_bundle(curve: NodalCurve, pt: PointOnCurve) -> LineBundleData:
    """O(pt), glued so that :func:`canonical_section` is a global section."""
    if not curve.is_smooth_point(pt):
        raise ModelError(f"{pt} is not a smooth point")
    ell = linear_form_vanishing_at(pt)
    degs = [0] * curve.n_components
    degs[pt.component] = 1
    glu = []
    for n in curve.nodes:
        if n.branch_a.component == pt.component:
            glu.append(eval_form(ell, n.branch_a))
        elif n.branch_b.component == pt.component:
            glu.append(1 / eval_form(ell, n.branch_b))
        else:
            glu.append(Fraction(1))
    return LineBundleData(curve, tuple(degs), tuple(glu))


def canonical_section(curve: NodalCurve, pt: PointOnCurve) -> list[Fraction]:
    forms = [[Fraction(1)] for _ in range(curve.n_components)]
    forms[pt.component] = linear_form_vanishing_at(pt)
    return join_forms(forms)


def divisor_bundle(curve: NodalCurve, pts: Iterable[PointOnCurve]) -> LineBundleData:
    out = trivial_bundle(curve)
    for p in pts:
        out = out.tensor(point_bundle(curve, p))
    return out


# --- dualizing sheaf --------------------------------------------------------------


def _residue_factor(curve: NodalCurve, br: PointOnCurve) -> Fraction:
    """Residue at ``br`` of f * (s dt - t ds) / prod(linear forms at branches), per unit f(br)."""
    if br.is_infinity:
        return Fraction(1)
    a = br.coords[0]
    prod = Fraction(1)
    for q in curve.branches(br.component):
        if q.coords != br.coords and not q.is_infinity:
            prod *= a - q.coords[0]
    return -1 / prod


def dualizing_bundle(curve: NodalCurve) -> LineBundleData:
    """The dualizing sheaf omega as a LineBundleData.

    On a component with k node branches omega has degree k - 2; a section is
    f * (s dt - t ds) / prod(branch linear forms).  Its residues at the two
    branches of a node must cancel, which fixes the gluing scalar.
    """
    degs = tuple(curve.valence(i) - 2 for i in range(curve.n_components))
    glu = []
    for n in curve.nodes:
        ca = _residue_factor(curve, n.branch_a)
        cb = _residue_factor(curve, n.branch_b)
        glu.append(-cb / ca)
    return LineBundleData(curve, degs, tuple(glu))


def _series_inverse_product(roots: Sequence[Fraction], n_terms: int) -> list[Fraction]:
    """Coefficients of prod 1/(1 - q y) up to y^(n_terms-1)."""
    coeffs = [Fraction(1)] + [Fraction(0)] * max(n_terms - 1, 0)
    for q in roots:
        # multiply by 1/(1 - q y): c'_k = c_k + q c'_{k-1}
        for k in range(1, n_terms):
            coeffs[k] = coeffs[k] + q * coeffs[k - 1]
    return coeffs[:n_terms]


def h0_residue_oracle(curve: NodalCurve, twist: LineBundleData | None = None) -> int:
    """h^0(omega (x) twist) from the meromorphic differential model.

    On component i a section is tau_i = P_i(x) dx / prod_{finite branches}(x - a),
    with x = s/t and deg P_i <= valence + deg(twist on i) - 2.  Residues are
    taken directly (finite branches by evaluation, the branch at infinity by
    Laurent expansion) and the residues at the two branches of every node
    must cancel after applying the twist's gluing scalar.
    """
    if twist is None:
        twist = trivial_bundle(curve)
    if twist.curve != curve:
        raise ModelError("twist lives on another curve")
    m = curve.n_components
    top = [curve.valence(i) + twist.degrees[i] - 2 for i in range(m)]
    offs = _offsets(top)

    def residue_row(br: PointOnCurve) -> dict:
        i = br.component
        n = top[i]
        if n < 0:
            return {}
        finite = [q.coords[0] for q in curve.branches(i) if not q.is_infinity]
        row = {}
        if br.is_infinity:
            # Res_inf x^(j - m_i) / prod(x - a) dx = -h_k, k = j - m_i - len(finite) + 1
            mi = twist.degrees[i]
            h = _series_inverse_product(finite, n + 2)
            for j in range(n + 1):
                k = j - mi - len(finite) + 1
                if 0 <= k < len(h) and h[k]:
                    row[offs[i] + j] = -h[k]
        else:
            a = br.coords[0]
            den = Fraction(1)
            for q in finite:
                if q != a:
                    den *= a - q
            for j in range(n + 1):
                v = a ** j / den
                if v:
                    row[offs[i] + j] = v
        return row

    rows = []
    for node, lam in zip(curve.nodes, twist.gluings):
        row = residue_row(node.branch_a)
        for k, v in residue_row(node.branch_b).items():
            nv = row.get(k, 0) + lam * v
            if nv:
                row[k] = nv
            else:
                row.pop(k, None)
        rows.append(row)
    mat = RatMatrix(len(rows), offs[-1], rows)
    return mat.ncols - rank(mat)


# --- construction helpers ---------------------------------------------------------


def small_rational(rng: random.Random, height: int = 9, nonzero: bool = False) -> Fraction:
    while True:
        x = Fraction(rng.randint(-height, height), rng.randint(1, max(2, height // 2)))
        if x or not nonzero:
            return x


def sample_point(curve: NodalCurve, rng: random.Random, component: int | None = None,
                 avoid: Iterable[PointOnCurve] = ()) -> PointOnCurve:
    """A seeded small-height rational smooth point."""
    avoid = set(avoid)
    if component is None:
        component = rng.randrange(curve.n_components)
    for _ in range(1000):
        pt = PointOnCurve(component, (small_rational(rng), Fraction(1)))
        if curve.is_smooth_point(pt) and pt not in avoid:
            return pt
    raise InconclusiveError("could not sample a smooth point")


def with_resampling(seed: int, build: Callable[[int], T], audit: Callable[[T], bool],
                    attempts: int = MAX_RESAMPLE) -> tuple[T, int]:
    """Call ``build(seed + k)`` until ``audit`` accepts; return the object and used seed."""
    for k in range(attempts):
        obj = build(seed + k)
        if audit(obj):
            return obj, seed + k
    raise InconclusiveError(f"degeneracy audit failed for seeds {seed}..{seed + attempts - 1}")


def attach_bridge(Y: NodalCurve, A: LineBundleData, u: PointOnCurve, v: PointOnCurve,
                  seed: int | None = None) -> tuple[NodalCurve, LineBundleData]:
    """Glue a new P^1 carrying O(1) to Y at u and v (u to 0, v to infinity)."""
    if A.curve != Y:
        raise ModelError("bundle is not on Y")
    if u == v:
        raise ModelError("bridge points must be distinct")
    for p in (u, v):
        if not Y.is_smooth_point(p):
            raise ModelError(f"bridge point {p} is not a smooth point of Y")
    z = Y.n_components
    rng = random.Random(f"bridge:{Y.seed if seed is None else seed}:{z}")
    nodes = Y.nodes + (
        Node(u, PointOnCurve(z, (0, 1))),
        Node(v, PointOnCurve(z, (1, 0))),
    )
    X = NodalCurve(z + 1, nodes, Y.seed)
    L = LineBundleData(X, A.degrees + (1,), A.gluings + (small_rational(rng, nonzero=True),
                                                          small_rational(rng, nonzero=True)))
    return X, L


def restrict(bundle_big: LineBundleData, vec: Sequence, n_components: int) -> list[Fraction]:
    """Restriction of a section to the first ``n_components`` components."""
    offs = _offsets(bundle_big.degrees)
    return list(vec[:offs[n_components]])


def sub_bundle(curve_small: NodalCurve, bundle_big: LineBundleData) -> LineBundleData:
    """The restriction of ``bundle_big`` to a curve whose nodes form a prefix."""
    k = len(curve_small.nodes)
    return LineBundleData(curve_small, bundle_big.degrees[:curve_small.n_components], bundle_big.gluings[:k])


# --- serialization ------------------------------------------------------------------


def model_to_json(bundle: LineBundleData) -> dict:
    c = bundle.curve
    return {
        "components": c.n_components,
        "nodes": [
            {"a": n.branch_a.to_json(), "b": n.branch_b.to_json(), "gluing": rat_to_str(g)}
            for n, g in zip(c.nodes, bundle.gluings)
        ],
        "degrees": list(bundle.degrees),
        "seed": c.seed,
    }


def model_from_json(data: dict) -> LineBundleData:
    nodes = [Node(PointOnCurve.from_json(n["a"]), PointOnCurve.from_json(n["b"])) for n in data["nodes"]]
    curve = NodalCurve(int(data["components"]), tuple(nodes), int(data.get("seed", 0)))
    return LineBundleData(curve, tuple(data["degrees"]), tuple(as_rat(n["gluing"]) for n in data["nodes"]))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def model_hash(bundle: LineBundleData) -> str:
    return hashlib.sha256(canonical_json(model_to_json(bundle)).encode()).hexdigest()[:16]
