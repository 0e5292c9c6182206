"""Dilute O(n) loop model on the rhombic lattice.

Face states of a rhombus (sides ``0..3`` counter-clockwise, vertex ``k``
between sides ``k-1`` and ``k``; vertices 0 and 2 carry the angle alpha):

=================  ======================  =======
state              strands                 weight
=================  ======================  =======
``empty``          none                    t
``corner_alpha``   around vertex 0 or 2    u2
``corner_comp``    around vertex 1 or 3    u1
``straight``       (0,2) or (1,3)          v
``double_alpha``   around vertices 0 & 2   w2
``double_comp``    around vertices 1 & 3   w1
=================  ======================  =======

A triangle is either ``tri_empty`` (weight y) or ``tri_strand`` (weight r).
"""
from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator

import numpy as np

from .lattice import Path, RhombicDomain, contour_integral, winding_angle

LABELS = (
    "empty",
    "corner_alpha",
    "corner_comp",
    "straight",
    "double_alpha",
    "double_comp",
    "tri_empty",
    "tri_strand",
)
_WEIGHT_OF = {
    "empty": "t",
    "corner_alpha": "u2",
    "corner_comp": "u1",
    "straight": "v",
    "double_alpha": "w2",
    "double_comp": "w1",
    "tri_empty": "y",
    "tri_strand": "r",
}
DEFAULT_MAX_FACES = 12


@dataclass(frozen=True)
class OnWeightSet:
    t: float
    u1: float
    u2: float
    v: float
    w1: float
    w2: float
    n: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("t", "u1", "u2", "v", "w1", "w2", "n")}

    def replace(self, **kw) -> "OnWeightSet":
        d = self.as_dict()
        d.update(kw)
        return OnWeightSet(**d)


@dataclass(frozen=True)
class OnBoundaryWeights:
    r: float
    y: float


def bulk_weights(lam: float, u: float) -> OnWeightSet:
    """Integrable bulk face weights at crossing parameter ``lam`` and spectral parameter ``u``."""
    s, c = math.sin, math.cos
    return OnWeightSet(
        t=s(3 * lam - u) * s(u) + s(2 * lam) * s(3 * lam),
        u1=-s(3 * lam - u) * s(2 * lam),
        u2=-s(u) * s(2 * lam),
        v=s(3 * lam - u) * s(u),
        w1=s(3 * lam - u) * s(2 * lam - u),
        w2=-s(lam - u) * s(u),
        n=-2 * c(4 * lam),
    )


def boundary_weights(lam: float, u: float) -> OnBoundaryWeights:
    """Integrable triangle weights: ``r`` for a strand, ``y`` for an empty face."""
    return OnBoundaryWeights(r=-math.cos((3 * lam + 2 * u) / 2), y=math.cos((3 * lam - 2 * u) / 2))


def ordinary_transition_weights(lam: float, u: float) -> OnBoundaryWeights:
    """Boundary weights of the second branch, obtained by shifting ``lam`` by pi."""
    return boundary_weights(lam + math.pi, u)


def spin(lam: float) -> float:
    return 3 * lam / math.pi - 1


def bulk_u(lam: float, alpha: float) -> float:
    return (spin(lam) + 1) * alpha


def boundary_u(lam: float, alpha: float) -> float:
    return (spin(lam) + 1) * alpha / 2


def cr_system_residuals(w: OnWeightSet, s: float, alpha: float) -> np.ndarray:
    """The four linear relations that make a rhombus contour integral vanish."""
    tau = np.exp(1j * math.pi * s)
    mu = np.exp(1j * (s + 1) * alpha)
    t, u1, u2, v, w1, w2, n = w.t, w.u1, w.u2, w.v, w.w1, w.w2, w.n
    return np.array(
        [
            t + mu * u1 - mu / tau * u2 - v,
            -u1 / tau + n * u2 + tau * mu * v - mu / tau * (w1 + n * w2),
            n * u1 - tau * u2 - mu / tau**2 * v + mu * (n * w1 + w2),
            -mu / tau**2 * u1 + mu * tau * u2 + n * v - w1 / tau**2 - tau**2 * w2,
        ]
    )


def boundary_relation(bw: OnBoundaryWeights, s: float, alpha: float) -> complex:
    """Complex quantity whose real part must vanish on a triangle."""
    p = (s + 1) * alpha
    q = math.pi * (1 - s)
    return -np.exp(0.5j * (p + q)) * bw.r - np.exp(0.5j * (-p + q)) * bw.y


def boundary_cr_residual(lam: float, alpha: float) -> float:
    s = spin(lam)
    bw = boundary_weights(lam, boundary_u(lam, alpha))
    return abs(boundary_relation(bw, s, alpha).real)


# ---------------------------------------------------------------------------
# local states


def face_states(face) -> list:
    """``(pairs, label)`` for every local configuration of ``face``."""
    if face.kind == "triangle":
        return [((), "tri_empty"), (((0, 1),), "tri_strand")]
    if face.kind != "rhombus":
        raise ValueError(f"no loop states on a {face.kind}")
    out = [((), "empty")]
    for k in range(4):
        out.append(((((k - 1) % 4, k),), "corner_alpha" if k % 2 == 0 else "corner_comp"))
    out.append((((0, 2),), "straight"))
    out.append((((1, 3),), "straight"))
    out.append((((3, 0), (1, 2)), "double_alpha"))
    out.append((((0, 1), (2, 3)), "double_comp"))
    return out


@dataclass(frozen=True)
class LoopConfig:
    """One admissible configuration of a domain."""

    face_state: tuple
    labels: tuple
    occupied_midedges: frozenset
    closed_loop_count: int
    open_path: Path | None = None
    endpoint: int | None = None

    @property
    def label_counts(self) -> Counter:
        return Counter(self.labels)


class CapExceeded(RuntimeError):
    pass


def _cap() -> int:
    return int(os.environ.get("HOLOVERIFY_MAX_FACES", DEFAULT_MAX_FACES))


def _search(domain: RhombicDomain, a: int | None, max_faces: int | None):
    """Depth-first assignment of face states with edge-matching pruning.

    Yields ``(assignment, defects)`` where ``defects`` is the sorted tuple of
    midedges with mismatched occupancy (occupied boundary midedges count).
    With ``a`` given, configurations with defects ``{a, z}`` are kept too.
    """
    cap = _cap() if max_faces is None else max_faces
    nf = len(domain.faces)
    if nf > cap:
        raise CapExceeded(f"domain has {nf} faces, cap is {cap}")
    S = [face_states(f) for f in domain.faces]
    occ = [[frozenset(k for p in pairs for k in p) for pairs, _ in st] for st in S]
    last = {e: max(fi for fi, _ in lst) for e, lst in domain.incidence.items()}
    closes: dict = {}
    for e, fi in last.items():
        closes.setdefault(fi, []).append(e)
    assign = [0] * nf

    def rec(fi, defects):
        if fi == nf:
            yield list(assign), tuple(sorted(defects))
            return
        for si in range(len(S[fi])):
            assign[fi] = si
            d = defects
            bad = False
            for e in closes.get(fi, ()):
                lst = domain.incidence[e]
                o = [k in occ[f2][assign[f2]] for f2, k in lst]
                mism = o[0] if len(o) == 1 else o[0] != o[1]
                if mism:
                    if a is None:
                        bad = True
                        break
                    d = d + (e,)
            if bad or len(d) > 2 or (len(d) == 2 and a not in d):
                continue
            yield from rec(fi + 1, d)

    for asg, defects in rec(0, ()):
        if not defects or (a is not None and len(defects) == 2):
            yield asg, defects, S


def _trace(domain, S, asg, a):
    """Loop count and, if ``a`` is set, the open path from ``a`` with its steps."""
    faces = domain.faces
    partner = {}
    occupied = set()
    for fi, si in enumerate(asg):
        for p, q in S[fi][si][0]:
            partner[(fi, p)] = (fi, q)
            partner[(fi, q)] = (fi, p)
            occupied.add(faces[fi].midedges[p])
            occupied.add(faces[fi].midedges[q])
    across = {}
    for e, lst in domain.incidence.items():
        if len(lst) == 2 and lst[0] in partner and lst[1] in partner:
            across[lst[0]] = lst[1]
            across[lst[1]] = lst[0]
    seen = set()
    path = None
    if a is not None:
        cur = domain.incidence[a][0]
        mids = [a]
        steps = [faces[cur[0]].entry[cur[1]]]
        while True:
            seen.add(cur)
            out = partner[cur]
            seen.add(out)
            f = faces[out[0]]
            steps.append(-f.entry[out[1]])
            mids.append(f.midedges[out[1]])
            if out not in across:
                break
            nxt = across[out]
            steps.append(faces[nxt[0]].entry[nxt[1]])
            cur = nxt
        path = Path(tuple(mids), tuple(steps))
    loops = 0
    for h in partner:
        if h in seen:
            continue
        loops += 1
        x = h
        while x not in seen:
            seen.add(x)
            y = partner[x]
            seen.add(y)
            x = across[y]
    return loops, path, frozenset(occupied)


def enumerate_configs(domain: RhombicDomain, endpoints=None, max_faces: int | None = None) -> Iterator[LoopConfig]:
    """Stream the admissible configurations of ``domain``.

    ``endpoints=None`` gives the closed configurations.  ``endpoints=(a, z)``
    gives those with one open path from ``a`` to ``z``; ``z=None`` means any
    endpoint.
    """
    a = z = None
    if endpoints is not None:
        a, z = endpoints
    for asg, defects, S in _search(domain, a, max_faces):
        if a is not None and not defects:
            continue
        end = None
        if defects:
            end = defects[0] if defects[1] == a else defects[1]
            if z is not None and end != z:
                continue
        loops, path, occupied = _trace(domain, S, asg, a if defects else None)
        yield LoopConfig(
            tuple(asg),
            tuple(S[fi][si][1] for fi, si in enumerate(asg)),
            occupied,
            loops,
            path,
            end,
        )


def _weight_table(w: OnWeightSet, bw: OnBoundaryWeights | None) -> dict:
    d = w.as_dict()
    if bw is not None:
        d["r"], d["y"] = bw.r, bw.y
    return d


def config_weight(c: LoopConfig, w: OnWeightSet, bw: OnBoundaryWeights | None = None) -> float:
    """``n**loops`` times the product of the face weights."""
    table = _weight_table(w, bw)
    out = w.n ** c.closed_loop_count
    for lab in c.labels:
        key = _WEIGHT_OF[lab]
        if key not in table:
            raise ValueError("triangle face present but no boundary weights given")
        out *= table[key]
    return out


class Ensemble:
    """Enumerated configurations of one domain, stored compactly.

    Each configuration is reduced to the exponents of the weight symbols,
    its loop count, its endpoint and the winding of its open path, so that
    observables at many parameter points reuse a single enumeration.
    """

    SYMBOLS = ("t", "u1", "u2", "v", "w1", "w2", "y", "r")

    def __init__(self, domain: RhombicDomain, max_faces: int | None = None):
        self.domain = domain
        a = domain.boundary_point_a
        exps, loops, ends, winds = [], [], [], []
        for c in enumerate_configs(domain, (a, None), max_faces):
            exps.append(self._exponents(c))
            loops.append(c.closed_loop_count)
            ends.append(c.endpoint)
            winds.append(c.open_path.winding)
        for c in enumerate_configs(domain, None, max_faces):
            exps.append(self._exponents(c))
            loops.append(c.closed_loop_count)
            ends.append(-1)
            winds.append(0.0)
        self.exponents = np.array(exps, dtype=float).reshape(-1, len(self.SYMBOLS))
        self.loops = np.array(loops, dtype=float)
        self.ends = np.array(ends, dtype=int)
        self.windings = np.array(winds, dtype=float)

    def _exponents(self, c):
        cnt = Counter(_WEIGHT_OF[lab] for lab in c.labels)
        return [cnt.get(k, 0) for k in self.SYMBOLS]

    def __len__(self):
        return len(self.loops)

    def weights(self, w: OnWeightSet, bw: OnBoundaryWeights | None = None) -> np.ndarray:
        table = _weight_table(w, bw)
        out = np.ones(len(self))
        for i, k in enumerate(self.SYMBOLS):
            col = self.exponents[:, i]
            if not np.any(col):
                continue
            if k not in table:
                raise ValueError("triangle face present but no boundary weights given")
            out = out * table[k] ** col
        return out * w.n**self.loops

    def observables(self, s: float, w: OnWeightSet, bw: OnBoundaryWeights | None = None) -> dict:
        """``F_s`` at every midedge reached by an open path, plus at ``a``."""
        dom = self.domain
        wt = self.weights(w, bw)
        closed = self.ends < 0
        Z = float(np.sum(wt[closed]))
        if Z == 0:
            raise ZeroDivisionError("partition function vanishes")
        theta_a = np.angle(dom.initial_direction())
        phase = np.exp(-1j * s * (self.windings + theta_a))
        F = {}
        idx = np.nonzero(~closed)[0]
        for e in sorted(set(self.ends[idx].tolist())):
            sel = idx[self.ends[idx] == e]
            F[e] = complex(np.sum(wt[sel] * phase[sel])) / Z
        F[dom.boundary_point_a] = F.get(dom.boundary_point_a, 0) + np.exp(-1j * s * theta_a)
        return F


def observable(domain: RhombicDomain, z: int, s: float, w: OnWeightSet, bw: OnBoundaryWeights | None = None) -> complex:
    """Parafermionic observable ``F_s(z)`` by exact enumeration."""
    return Ensemble(domain).observables(s, w, bw).get(z, 0j)


def _holo_residuals(ens: Ensemble, s, w, bw):
    F = ens.observables(s, w, bw)
    dom = ens.domain
    rho = [abs(contour_integral(dom, i, F)) for i in dom.faces_of_kind("rhombus")]
    tri = [abs(contour_integral(dom, i, F).real) for i in dom.faces_of_kind("triangle")]
    return max(rho, default=0.0), max(tri, default=0.0)


def verify_bulk_holomorphicity(domain, s: float, w: OnWeightSet, bw: OnBoundaryWeights | None = None, ensemble=None) -> float:
    """Largest ``|sum F dz|`` over the rhombi of ``domain``."""
    ens = ensemble or Ensemble(domain)
    return _holo_residuals(ens, s, w, bw)[0]


def verify_boundary_holomorphicity(domain, s: float, w: OnWeightSet, bw: OnBoundaryWeights, ensemble=None) -> float:
    """Largest ``|Re sum F dz|`` over the triangles of ``domain``."""
    if not domain.faces_of_kind("triangle"):
        raise ValueError("domain has no triangle faces")
    ens = ensemble or Ensemble(domain)
    return _holo_residuals(ens, s, w, bw)[1]


def integrable_point(lam: float, alpha: float):
    """``(s, bulk weights, boundary weights)`` tied to the rhombus angle."""
    return spin(lam), bulk_weights(lam, bulk_u(lam, alpha)), boundary_weights(lam, boundary_u(lam, alpha))


def triangle_local_residual(lam: float, alpha: float, from_second_side: bool = False) -> float:
    """Real part of the two-state triangle sum for a fixed outer configuration.

    The open path reaches the triangle through one side and either stops
    there (empty triangle) or crosses to the other side (strand).  The
    arrival winding is the principal angle of the entry step.
    """
    from .lattice import build_domain

    s, _, bw = integrable_point(lam, alpha)
    dom = build_domain(1, 1, alpha, "triangles")
    f = dom.faces[0]
    k_in, k_out = (1, 0) if not from_second_side else (0, 1)
    d_in = f.entry[k_in]
    d_out = -f.entry[k_out]
    th = math.atan2(d_in.imag, d_in.real)
    th_out = th + winding_angle([d_in, d_out])
    val = bw.y * f.side(k_in) * np.exp(-1j * s * th) + bw.r * f.side(k_out) * np.exp(-1j * s * th_out)
    return abs(val.real)


# ---------------------------------------------------------------------------
# reflection equation, evaluated diagrammatically on two strands

# rhombus as a two-slot operator read upwards: inputs are sides 3 (left) and
# 0 (right), outputs sides 2 (left) and 1 (right)
_SIDE_SLOT = {3: ("in", 0), 0: ("in", 1), 2: ("out", 0), 1: ("out", 1)}


def _rhombus_moves():
    from .lattice import build_domain

    face = build_domain(1, 1, 1.0).faces[0]
    moves = []
    for pairs, label in face_states(face):
        links = [(_SIDE_SLOT[p], _SIDE_SLOT[q]) for p, q in pairs]
        moves.append((links, _WEIGHT_OF[label]))
    return moves


def _layer_moves(kind, w, rmoves):
    """Map node occupancy ``(inL, inR, outL, outR)`` to ``[(links, weight)]``."""
    table: dict = {}
    if kind == "R":
        tab = w.as_dict()
        for links, key in rmoves:
            used = {p for l in links for p in l}
            occ = tuple(x in used for x in (("in", 0), ("in", 1), ("out", 0), ("out", 1)))
            table.setdefault(occ, []).append((links, tab[key]))
        return table
    # boundary face on the right slot; the left slot is a plain wire
    empty, occupied = w
    for left, right in product((False, True), repeat=2):
        links = []
        if left:
            links.append((("in", 0), ("out", 0)))
        if right:
            links.append((("in", 1), ("out", 1)))
        table[(left, right, left, right)] = [(links, occupied if right else empty)]
    return table


def _diagram(layers, n):
    """Sum a vertical stack of two-slot layers into external patterns.

    ``layers`` lists ``("R", weights)`` or ``("K", boundary weights)``, the
    latter acting on the right slot.  Returns ``pattern -> value`` where a
    pattern records which of the four external slots are occupied and how
    they are joined; closed loops contribute ``n`` each.
    """
    rmoves = _rhombus_moves()
    L = len(layers)
    tables = [_layer_moves(kind, w, rmoves) for kind, w in layers]
    ext = [(0, 0), (0, 1), (L, 0), (L, 1)]
    patterns: dict = {}
    for bits in product((False, True), repeat=2 * (L + 1)):
        occ = {(h, sl): bits[2 * h + sl] for h in range(L + 1) for sl in (0, 1)}
        per_layer = []
        for h, tab in enumerate(tables):
            key = (occ[(h, 0)], occ[(h, 1)], occ[(h + 1, 0)], occ[(h + 1, 1)])
            per_layer.append(tab.get(key, []))
        for choice in product(*per_layer):
            weight = 1.0
            adj: dict = {}
            for h, (links, wt) in enumerate(choice):
                weight *= wt
                for p, q in links:
                    a = (h + (p[0] == "out"), p[1])
                    b = (h + (q[0] == "out"), q[1])
                    adj.setdefault(a, []).append(b)
                    adj.setdefault(b, []).append(a)
            seen: set = set()
            pairs = []
            for x in ext:
                if x in adj and x not in seen:
                    comp = _component(adj, x, seen)
                    pairs.append(tuple(sorted(e for e in comp if e in ext)))
            loops = 0
            for x in adj:
                if x not in seen:
                    _component(adj, x, seen)
                    loops += 1
            key = (tuple(occ[x] for x in ext), tuple(sorted(pairs)))
            patterns[key] = patterns.get(key, 0.0) + weight * n**loops
    return patterns


def _component(adj, start, seen):
    stack = [start]
    comp = []
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        comp.append(x)
        stack.extend(adj[x])
    return comp


def boundary_operator(bw: OnBoundaryWeights) -> tuple:
    """Diagonal one-slot operator ``(empty, occupied)`` built from ``(r, y)``.

    Read along the strip, the boundary slot carries ``-r`` when empty and
    ``y`` when a strand runs through it.  Note the exchange with respect to
    the contour-integral labelling of triangle faces (``y`` empty, ``r``
    strand); only this reading satisfies the reflection identity.
    """
    return (-bw.r, bw.y)


def face_labelling(bw: OnBoundaryWeights) -> tuple:
    """``(empty, occupied)`` in the triangle-face labelling; a control for the reflection check."""
    return (bw.y, bw.r)


def reflection_sides(lam: float, u: float, v: float, bw_fn=boundary_weights, slot=boundary_operator):
    """Both sides of the two-strand reflection identity as pattern dictionaries."""
    n = -2 * math.cos(4 * lam)
    Rm, Rp = bulk_weights(lam, u - v), bulk_weights(lam, u + v)
    Ku, Kv = slot(bw_fn(lam, u)), slot(bw_fn(lam, v))
    lhs = _diagram([("K", Kv), ("R", Rp), ("K", Ku), ("R", Rm)], n)
    rhs = _diagram([("R", Rm), ("K", Ku), ("R", Rp), ("K", Kv)], n)
    return lhs, rhs


def reflection_identity_residual(lam: float, u: float, v: float, bw_fn=boundary_weights, slot=boundary_operator) -> float:
    """Largest pattern-wise residual between the two sides of the reflection identity."""
    from .numerics import residual

    lhs, rhs = reflection_sides(lam, u, v, bw_fn, slot)
    keys = set(lhs) | set(rhs)
    return max((residual(lhs.get(k, 0.0), rhs.get(k, 0.0)) for k in keys), default=0.0)
