"""Finite domains of the rhombic lattice: faces, midedges, contours and windings.

A domain built by :func:`build_domain` is a stack of ``rows`` horizontal
rows, each holding ``cols`` unit rhombi of angle ``alpha``.  Lattice
points are ``P(i, j) = rot * (i + j * exp(1j * alpha))`` with the global
rotation ``rot = exp(1j * (pi - alpha) / 2)``, which makes the row
direction ``1 + exp(1j * alpha)`` point straight up.  Face ``(i, j)`` with
``j <= i < j + cols`` sits in row ``j``; the faces with ``i == j`` line the
straight left boundary and may be cut into triangles or pentagons.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

BOUNDARY_KINDS = ("rhombi-only", "triangles", "pentagons")


@dataclass(frozen=True)
class Face:
    """One face of a domain.

    ``vertices`` are counter-clockwise; side ``k`` runs from ``vertices[k]``
    to ``vertices[k + 1]``.  ``midedges[k]`` is the midedge id on side ``k``
    (``None`` for a side without one) and ``contributing`` lists the sides
    that enter discrete contour integrals.  ``entry[k]`` is the
    lattice-parallel unit step that crosses side ``k`` into the face.
    """

    kind: str
    vertices: tuple
    midedges: tuple
    contributing: tuple
    entry: tuple
    cell: tuple = ()

    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    def side(self, k: int) -> complex:
        return self.vertices[(k + 1) % self.n_sides] - self.vertices[k]

    def corner_angle(self, k: int) -> float:
        """Interior angle at ``vertices[k]``."""
        v = self.vertices
        a = v[k - 1] - v[k]
        b = v[(k + 1) % len(v)] - v[k]
        return abs(math.atan2((a / b).imag, (a / b).real))

    def side_of(self, midedge: int) -> int:
        return self.midedges.index(midedge)


@dataclass(frozen=True)
class RhombicDomain:
    alpha: float
    faces: tuple
    midedges: tuple
    incidence: Mapping[int, tuple]
    boundary_point_a: int
    beta: float | None = None
    rows: int = 0
    cols: int = 0
    boundary_kind: str = "rhombi-only"

    def is_boundary(self, e: int) -> bool:
        return len(self.incidence[e]) == 1

    @property
    def boundary_midedges(self) -> list:
        return [e for e in range(len(self.midedges)) if self.is_boundary(e)]

    def faces_of_kind(self, kind: str) -> list:
        return [i for i, f in enumerate(self.faces) if f.kind == kind]

    def initial_direction(self) -> complex:
        """Unit step entering the domain at the marked boundary midedge."""
        fi, k = self.incidence[self.boundary_point_a][0]
        return self.faces[fi].entry[k]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "faces": [
                {
                    "kind": f.kind,
                    "vertices": [[z.real, z.imag] for z in f.vertices],
                    "contributing": list(f.contributing),
                }
                for f in self.faces
            ],
            "midedges": [[z.real, z.imag] for z in self.midedges],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


@dataclass(frozen=True)
class Path:
    """A chain of midedges together with the unit steps taken between them."""

    midedges: tuple
    steps: tuple = field(default=())

    @property
    def winding(self) -> float:
        return winding_angle(self.steps)


def winding_angle(directions: Sequence[complex]) -> float:
    """Total signed turning of a polyline given its successive step vectors.

    Each turn is taken as the principal angle in ``(-pi, pi]``.
    """
    d = [complex(x) for x in directions]
    total = 0.0
    for prev, nxt in zip(d, d[1:]):
        if prev == 0 or nxt == 0:
            raise ValueError("zero-length step")
        q = nxt / prev
        total += math.atan2(q.imag, q.real)
    return total


def contour_integral(domain: RhombicDomain, face, values: Mapping[int, complex]) -> complex:
    """Discrete contour integral ``sum_k (side vector k) * F(midedge k)``.

    Only contributing sides enter; midedges absent from ``values`` count as 0.
    """
    f = domain.faces[face] if isinstance(face, (int, np.integer)) else face
    total = 0j
    for k in f.contributing:
        e = f.midedges[k]
        if e is None:
            continue
        total += f.side(k) * complex(values.get(e, 0.0))
    return total


def _key(z: complex) -> tuple:
    return (round(z.real, 9), round(z.imag, 9))


def build_domain(
    rows: int,
    cols: int,
    alpha: float,
    boundary_kind: str = "rhombi-only",
    beta: float | None = None,
    a: int | None = None,
) -> RhombicDomain:
    """Build a ``rows x cols`` domain of unit rhombi with lower angle ``alpha``.

    ``boundary_kind`` selects what replaces the left-boundary faces: nothing,
    triangles (the rhombus cut along its boundary diagonal) or pentagons of
    outer angle ``beta`` (the outer vertex truncated).  ``a`` overrides the
    marked boundary midedge, which by default is the topmost, then
    rightmost, boundary midedge of a rhombus.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if not 0 < alpha < math.pi:
        raise ValueError("alpha must lie in (0, pi)")
    if boundary_kind not in BOUNDARY_KINDS:
        raise ValueError(f"unknown boundary kind {boundary_kind!r}")
    if boundary_kind == "pentagons":
        # below alpha the two truncation points cross and the face self-intersects
        if beta is None or not alpha <= beta < math.pi:
            raise ValueError("pentagons need beta in [alpha, pi)")
    rot = np.exp(1j * (math.pi - alpha) / 2)
    e2 = np.exp(1j * alpha)

    def P(i, j):
        return complex(rot * (i + j * e2))

    ids: dict = {}
    mids: list = []

    def mid(p, q):
        key = _key((p + q) / 2)
        if key not in ids:
            ids[key] = len(mids)
            mids.append(complex((p + q) / 2))
        return ids[key]

    faces = []
    for j in range(rows):
        for i in range(j, j + cols):
            A, B, C, D = P(i, j), P(i + 1, j), P(i + 1, j + 1), P(i, j + 1)
            # step into the face across each rhombus side, parallel to its neighbours
            entry = (D - A, A - B, B - C, C - D)
            cut = i == j and boundary_kind != "rhombi-only"
            if not cut:
                v = (A, B, C, D)
                me = tuple(mid(v[k], v[(k + 1) % 4]) for k in range(4))
                faces.append(Face("rhombus", v, me, (0, 1, 2, 3), entry, (i, j)))
            elif boundary_kind == "triangles":
                v = (A, B, C)
                me = tuple(mid(v[k], v[(k + 1) % 3]) for k in range(3))
                faces.append(Face("triangle", v, me, (0, 1, 2), (entry[0], entry[1], None), (i, j)))
            else:
                # outer vertex D replaced by two points at angle beta
                tw = np.exp(1j * (alpha - beta) / 2)
                y = complex(C + tw * (D - C))
                x = complex(A + (D - A) / tw)
                v = (A, B, C, y, x)
                me = (mid(A, B), mid(B, C), mid(C, y), None, mid(x, A))
                faces.append(Face("pentagon", v, me, (0, 1, 2, 4), (entry[0], entry[1], None, None, None), (i, j)))
    inc: dict = {}
    for fi, f in enumerate(faces):
        for k, e in enumerate(f.midedges):
            if e is not None:
                inc.setdefault(e, []).append((fi, k))
    inc = {e: tuple(v) for e, v in inc.items()}
    dom = RhombicDomain(alpha, tuple(faces), tuple(mids), inc, -1, beta, rows, cols, boundary_kind)
    cand = [e for e in dom.boundary_midedges if faces[inc[e][0][0]].kind == "rhombus"]
    if a is None:
        if not cand:
            a = -1
        else:
            a = max(cand, key=lambda e: (round(mids[e].imag, 9), round(mids[e].real, 9)))
    elif a not in cand:
        raise ValueError("marked point must be a boundary midedge of a rhombus")
    return RhombicDomain(alpha, tuple(faces), tuple(mids), inc, a, beta, rows, cols, boundary_kind)


def domain_from_dict(d: dict) -> dict:
    """Light parser for :meth:`RhombicDomain.to_dict` output (geometry only)."""
    return {
        "alpha": float(d["alpha"]),
        "faces": [
            {"kind": f["kind"], "vertices": [complex(*v) for v in f["vertices"]], "contributing": list(f["contributing"])}
            for f in d["faces"]
        ],
        "midedges": [complex(*m) for m in d["midedges"]],
    }


def iter_domains(max_faces: int, kinds: Iterable[str] = BOUNDARY_KINDS, max_cols: int | None = None):
    """All ``(rows, cols, kind)`` shapes with at most ``max_faces`` faces."""
    for kind in kinds:
        for rows in range(1, max_faces + 1):
            for cols in range(1, max_faces // rows + 1):
                if max_cols is not None and cols > max_cols:
                    continue
                yield rows, cols, kind
