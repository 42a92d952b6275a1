"""Geometry of the pi/4-rotated square grid and discrete simply connected domains.

Conventions used throughout the package:

* Grid sites are integer pairs ``(k, s)``.  Sites with ``k + s`` even are
  *faces* (spins live there), sites with ``k + s`` odd are *vertices* of the
  graph ``G``.  The physical position of ``(k, s)`` is the complex number
  ``k + i*s``.
* Edges of ``G`` join vertices at diagonal steps ``(+-1, +-1)``, so every
  face is a unit-diagonal square with vertices ``(k+-1, s)``, ``(k, s+-1)``
  and the edge length is ``sqrt(2)``.  Under a mesh scale ``delta`` the
  physical edge length is ``sqrt(2)*delta``.
* An oriented edge is a ``(tail, head)`` vertex pair.  The fixed total order
  of oriented edges is lexicographic in ``(tail_k, tail_s, direction_index)``
  with direction index enumerating ``exp(i*pi/4)``, ``exp(3i*pi/4)``,
  ``exp(-3i*pi/4)``, ``exp(-i*pi/4)``.
* ``eta`` factors: for an oriented edge, ``eta = varsigma * conj(sqrt(dir))``
  where ``dir`` is the unit direction of the edge, the square root is the
  principal branch (argument in ``(-pi/2, pi/2]``) and
  ``varsigma = exp(i*pi/4)``.  Corners carry the analogous factor built from
  the direction of their decoration (face center towards vertex).
"""

from __future__ import annotations

import cmath
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    DisconnectedFaces,
    NotSimplyConnected,
    ParityViolation,
    PathCollisionUnresolvable,
    PathOutsideDomain,
    TooCoarse,
    VertexOutsideDomain,
)

Coord = tuple[int, int]
Edge = tuple[Coord, Coord]          # sorted vertex pair
OrientedEdge = tuple[Coord, Coord]  # (tail, head)
Corner = tuple[Coord, Coord]        # (face, vertex)

VARSIGMA = cmath.exp(1j * cmath.pi / 4)

# vertex offsets around a face, counterclockwise starting east
_FACE_VERTEX_OFFSETS: tuple[Coord, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))
# edge-adjacent face offsets (shares an edge)
_FACE_NEIGHBOR_OFFSETS: tuple[Coord, ...] = ((1, 1), (-1, 1), (-1, -1), (1, -1))
# cornerwise face offsets (shares a single vertex)
_CORNERWISE_OFFSETS: tuple[Coord, ...] = ((2, 0), (0, 2), (-2, 0), (0, -2))

# diagonal step -> direction index, ordered by angle pi/4, 3pi/4, -3pi/4, -pi/4
_DIRECTION_INDEX = {(1, 1): 0, (-1, 1): 1, (-1, -1): 2, (1, -1): 3}

OUTER: Coord = (2**30, 2**30)  # sentinel for the outer face


def is_face(c: Coord) -> bool:
    return (c[0] + c[1]) % 2 == 0


def is_vertex(c: Coord) -> bool:
    return (c[0] + c[1]) % 2 == 1


def point(c: Coord) -> complex:
    """Physical position of a grid site (mesh scale 1)."""
    return complex(c[0], c[1])


def face_vertices(f: Coord) -> tuple[Coord, ...]:
    return tuple((f[0] + dk, f[1] + ds) for dk, ds in _FACE_VERTEX_OFFSETS)


def edge_key(v1: Coord, v2: Coord) -> Edge:
    return (v1, v2) if v1 <= v2 else (v2, v1)


def face_edges(f: Coord) -> tuple[Edge, ...]:
    vs = face_vertices(f)
    return tuple(edge_key(vs[i], vs[(i + 1) % 4]) for i in range(4))


def edge_faces(e: Edge) -> tuple[Coord, Coord]:
    """The two faces of the full grid adjacent to an edge."""
    (a, b), (c, d) = e
    return ((a, d), (c, b))


def edge_midpoint(e: Edge) -> complex:
    return (point(e[0]) + point(e[1])) / 2.0


def oriented(e: Edge) -> tuple[OrientedEdge, OrientedEdge]:
    return ((e[0], e[1]), (e[1], e[0]))


def reverse(oe: OrientedEdge) -> OrientedEdge:
    return (oe[1], oe[0])


def direction(oe: OrientedEdge) -> complex:
    d = point(oe[1]) - point(oe[0])
    return d / abs(d)


def direction_index(oe: OrientedEdge) -> int:
    step = (oe[1][0] - oe[0][0], oe[1][1] - oe[0][1])
    return _DIRECTION_INDEX[step]


def eta_for_direction(d: complex) -> complex:
    """varsigma * conj(principal sqrt of the unit direction d)."""
    return VARSIGMA * cmath.sqrt(d).conjugate()


def eta_edge(oe: OrientedEdge) -> complex:
    return eta_for_direction(direction(oe))


def corner_decoration(c: Corner) -> complex:
    """Unit direction of the decoration: face center towards vertex."""
    f, v = c
    return complex(v[0] - f[0], v[1] - f[1])


def eta_corner(c: Corner) -> complex:
    return eta_for_direction(corner_decoration(c))


def corner_of_type(face: Coord, eta: complex) -> Corner:
    """Corner of ``face`` whose decoration points along ``i * conj(eta)**2``.

    The four admissible eta values 1, i, exp(+-i*pi/4) give decorations
    i, -i, 1, -1 respectively.
    """
    dec = 1j * (eta.conjugate() ** 2)
    dv = (round(dec.real), round(dec.imag))
    v = (face[0] + dv[0], face[1] + dv[1])
    return (face, v)


def wind(d_in: complex, d_out: complex) -> float:
    """Rotation angle from direction d_in to d_out, in (-pi, pi]."""
    return cmath.phase(d_out / d_in)


@dataclass(frozen=True)
class Domain:
    """A finite set of faces of the rotated grid with all derived indexing.

    All containers are ordered deterministically; instances are immutable and
    safe to share between threads.
    """

    faces: frozenset[Coord]
    vertices: tuple[Coord, ...]
    edges: tuple[Edge, ...]
    oriented_edges: tuple[OrientedEdge, ...]
    corners: tuple[Corner, ...]
    edge_index: dict[Edge, int] = field(repr=False)
    oe_index: dict[OrientedEdge, int] = field(repr=False)

    def __post_init__(self):
        assert len(self.oriented_edges) == 2 * len(self.edges)

    @property
    def n_oriented(self) -> int:
        return len(self.oriented_edges)

    def has_edge(self, e: Edge) -> bool:
        return e in self.edge_index

    def faces_of_edge(self, e: Edge) -> tuple[Coord, Coord]:
        """Adjacent faces with OUTER substituted for non-domain faces."""
        f1, f2 = edge_faces(e)
        return (f1 if f1 in self.faces else OUTER, f2 if f2 in self.faces else OUTER)

    def is_interior_edge(self, e: Edge) -> bool:
        f1, f2 = edge_faces(e)
        return f1 in self.faces and f2 in self.faces

    def edges_at_vertex(self, v: Coord) -> tuple[Edge, ...]:
        return self._vertex_edges.get(v, ())

    @property
    def _vertex_edges(self) -> dict[Coord, tuple[Edge, ...]]:
        cached = object.__getattribute__(self, "__dict__").get("_ve_cache")
        if cached is None:
            ve: dict[Coord, list[Edge]] = {}
            for e in self.edges:
                ve.setdefault(e[0], []).append(e)
                ve.setdefault(e[1], []).append(e)
            cached = {v: tuple(sorted(es)) for v, es in ve.items()}
            object.__getattribute__(self, "__dict__")["_ve_cache"] = cached
        return cached

    def corner_edges(self, c: Corner) -> tuple[Edge, Edge]:
        """The two edges of the corner's face incident to the corner's vertex."""
        f, v = c
        es = tuple(e for e in face_edges(f) if v in e)
        assert len(es) == 2
        return es  # type: ignore[return-value]

    def interior_faces(self) -> tuple[Coord, ...]:
        """Faces whose four edge-neighbors are all in the domain."""
        out = []
        for f in sorted(self.faces):
            if all((f[0] + dk, f[1] + ds) in self.faces
                   for dk, ds in _FACE_NEIGHBOR_OFFSETS):
                out.append(f)
        return tuple(out)

    def to_json(self) -> str:
        return json.dumps({"faces": sorted(map(list, self.faces))})


def build_domain(inner_faces: Iterable[Coord]) -> Domain:
    """Build a Domain from a nonempty set of face coordinates.

    Raises ParityViolation for coordinates with odd ``k+s``,
    DisconnectedFaces when the resulting graph is disconnected, and
    NotSimplyConnected when the union of closed faces has a hole
    (detected through the Euler characteristic V - E + F = 1).
    """
    faces = frozenset(tuple(map(int, f)) for f in inner_faces)
    if not faces:
        raise DisconnectedFaces("empty face set")
    bad = [f for f in faces if not is_face(f)]
    if bad:
        raise ParityViolation(f"not face coordinates (k+s odd): {sorted(bad)}")

    edges = sorted({e for f in faces for e in face_edges(f)})
    vertices = sorted({v for e in edges for v in e})

    # connectivity of G via vertex-sharing between faces
    adj: dict[Coord, set[Coord]] = {v: set() for v in vertices}
    for f in faces:
        vs = face_vertices(f)
        for v in vs:
            adj[v].update(w for w in vs if w != v)
    seen = {vertices[0]}
    queue = deque([vertices[0]])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    if len(seen) != len(vertices):
        raise DisconnectedFaces(f"{len(vertices) - len(seen)} vertices unreachable")

    euler = len(vertices) - len(edges) + len(faces)
    if euler != 1:
        raise NotSimplyConnected(f"Euler characteristic {euler} != 1")

    oriented_edges: list[OrientedEdge] = []
    for e in edges:
        oriented_edges.extend(oriented(e))
    oriented_edges.sort(key=lambda oe: (oe[0][0], oe[0][1], direction_index(oe)))

    corners = tuple((f, v) for f in sorted(faces) for v in face_vertices(f))

    return Domain(
        faces=faces,
        vertices=tuple(vertices),
        edges=tuple(edges),
        oriented_edges=tuple(oriented_edges),
        corners=corners,
        edge_index={e: i for i, e in enumerate(edges)},
        oe_index={oe: i for i, oe in enumerate(oriented_edges)},
    )


def rectangle_domain(width: int, height: int) -> Domain:
    """Faces ``(k, s)`` with ``0 <= k < 2*width``, ``|s| <= height - 1``, k+s even.

    This exact face set is part of the public contract; rectangle_domain(1, 1)
    is the single face (0, 0) and rectangle_domain(2, 1) is {(0,0), (2,0)}.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    faces = {(k, s)
             for k in range(2 * width)
             for s in range(-(height - 1), height)
             if (k + s) % 2 == 0}
    return build_domain(faces)


def square_domain(side: int) -> Domain:
    """Centered square domain: faces with ``max(|k+s|, |k-s|) <= side``.

    ``side`` must be even; the face count is ``(side + 1)**2``.  Domains with
    increasing ``side`` are nested, which makes them suitable for
    infinite-volume extrapolation.
    """
    if side < 0 or side % 2 != 0:
        raise ValueError("side must be a nonnegative even integer")
    faces = {(k, s)
             for k in range(-side, side + 1)
             for s in range(-side, side + 1)
             if (k + s) % 2 == 0
             and abs(k + s) <= side and abs(k - s) <= side}
    return build_domain(faces)


def disk_domain(radius: float, mesh_delta: float) -> Domain:
    """All faces whose scaled centers lie in the open disk of given radius.

    Keeps the largest connected component of the face set (faces connected
    through shared vertices).  Raises TooCoarse when fewer than 4 faces
    survive.
    """
    if radius <= 0 or mesh_delta <= 0:
        raise ValueError("radius and mesh_delta must be positive")
    if radius / mesh_delta < 2:
        raise TooCoarse("radius/mesh_delta < 2")
    bound = int(radius / mesh_delta) + 1
    faces = {(k, s)
             for k in range(-bound, bound + 1)
             for s in range(-bound, bound + 1)
             if (k + s) % 2 == 0
             and mesh_delta * (k * k + s * s) ** 0.5 < radius}
    # largest component under vertex-sharing adjacency
    comps = []
    remaining = set(faces)
    while remaining:
        root = min(remaining)
        comp = {root}
        queue = deque([comp and root])
        while queue:
            f = queue.popleft()
            for dk, ds in _FACE_NEIGHBOR_OFFSETS + _CORNERWISE_OFFSETS:
                g = (f[0] + dk, f[1] + ds)
                if g in remaining and g not in comp:
                    comp.add(g)
                    queue.append(g)
        comps.append(comp)
        remaining -= comp
    faces = max(comps, key=len)
    if len(faces) < 4:
        raise TooCoarse(f"only {len(faces)} faces at delta={mesh_delta}")
    return build_domain(faces)


@dataclass(frozen=True)
class DefectPaths:
    """Branch cuts (dual paths) and disorder lines (primal paths).

    ``kappa`` is a tuple of dual paths, each stored as the ordered tuple of
    primal edges it crosses; ``gamma`` is a tuple of primal paths, each
    stored as the ordered tuple of edges it traverses.  ``kappa_crossed``
    and ``gamma_edges`` are the mod-2 reductions used by the matrix
    modifications: an edge crossed (or traversed) an even number of times
    drops out.
    """

    kappa: tuple[tuple[Edge, ...], ...] = ()
    gamma: tuple[tuple[Edge, ...], ...] = ()

    @property
    def kappa_crossed(self) -> frozenset[Edge]:
        acc: set[Edge] = set()
        for path in self.kappa:
            for e in path:
                acc.symmetric_difference_update({e})
        return frozenset(acc)

    @property
    def gamma_edges(self) -> frozenset[Edge]:
        acc: set[Edge] = set()
        for path in self.gamma:
            for e in path:
                acc.symmetric_difference_update({e})
        return frozenset(acc)

    def validate(self, domain: Domain) -> None:
        for path in self.kappa + self.gamma:
            for e in path:
                if not domain.has_edge(e):
                    raise PathOutsideDomain(f"edge {e} not in domain")

    def to_json(self) -> str:
        enc = lambda paths: [[[list(v1), list(v2)] for (v1, v2) in p] for p in paths]
        return json.dumps({"kappa": enc(self.kappa), "gamma": enc(self.gamma)})

    @staticmethod
    def from_json(text: str) -> "DefectPaths":
        raw = json.loads(text)
        dec = lambda paths: tuple(
            tuple((tuple(v1), tuple(v2)) for v1, v2 in p) for p in paths)
        return DefectPaths(kappa=dec(raw.get("kappa", [])),
                           gamma=dec(raw.get("gamma", [])))


def _dual_bfs(domain: Domain, start: Coord, goal: Coord,
              used: set[Edge]) -> tuple[Edge, ...]:
    """Shortest dual path between two faces (or OUTER), avoiding used edges.

    Steps of the dual walk cross one primal edge each; neighbor expansion is
    in sorted edge order so the result is deterministic.
    """
    parents: dict[Coord, tuple[Coord, Edge]] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        f = queue.popleft()
        if f == goal:
            path: list[Edge] = []
            node = f
            while node != start:
                node, e = parents[node]
                path.append(e)
            return tuple(reversed(path))
        if f == OUTER:
            nbrs = [(domain.faces_of_edge(e)[0] if domain.faces_of_edge(e)[1] == OUTER
                     else domain.faces_of_edge(e)[1], e)
                    for e in domain.edges if OUTER in domain.faces_of_edge(e)]
        else:
            nbrs = []
            for e in face_edges(f):
                if not domain.has_edge(e):
                    continue
                g1, g2 = domain.faces_of_edge(e)
                g = g2 if g1 == f else g1
                nbrs.append((g, e))
        for g, e in sorted(nbrs, key=lambda t: (t[0], t[1])):
            if e in used or g in seen:
                continue
            seen.add(g)
            parents[g] = (f, e)
            queue.append(g)
    raise PathCollisionUnresolvable(f"no dual path {start} -> {goal}")


def _primal_bfs(domain: Domain, start: Coord, goal: Coord,
                used: set[Edge]) -> tuple[Edge, ...]:
    """Shortest vertex-to-vertex path in G avoiding used edges."""
    parents: dict[Coord, tuple[Coord, Edge]] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v == goal:
            path: list[Edge] = []
            node = v
            while node != start:
                node, e = parents[node]
                path.append(e)
            return tuple(reversed(path))
        for e in domain.edges_at_vertex(v):
            w = e[1] if e[0] == v else e[0]
            if e in used or w in seen:
                continue
            seen.add(w)
            parents[w] = (v, e)
            queue.append(w)
    raise PathCollisionUnresolvable(f"no primal path {start} -> {goal}")


def default_defect_paths(domain: Domain,
                         branch_faces: Sequence[Coord] = (),
                         disorder_vertices: Sequence[Coord] = ()) -> DefectPaths:
    """Deterministic defect paths pairing consecutive sorted insertions.

    Branch faces are paired after a lexicographic sort; an odd count is
    completed with the outer face.  Disorder vertices must come in even
    number and are paired the same way.  Paths are routed by breadth-first
    search avoiding edges already used by earlier paths, which keeps the
    collection edge-disjoint; if no such routing exists,
    PathCollisionUnresolvable is raised.
    """
    branch = sorted(set(branch_faces))
    if len(branch) != len(list(branch_faces)):
        raise ValueError("branch faces must be distinct")
    for f in branch:
        if f not in domain.faces:
            raise PathOutsideDomain(f"branch face {f} not in domain")
    disorder = sorted(set(disorder_vertices))
    if len(disorder) != len(list(disorder_vertices)):
        raise ValueError("disorder vertices must be distinct")
    if len(disorder) % 2 != 0:
        raise VertexOutsideDomain("disorder vertex count must be even")
    for v in disorder:
        if v not in domain._vertex_edges:
            raise VertexOutsideDomain(f"vertex {v} not in domain")

    if len(branch) % 2 == 1:
        branch.append(OUTER)

    used: set[Edge] = set()
    kappa = []
    for i in range(0, len(branch), 2):
        path = _dual_bfs(domain, branch[i], branch[i + 1], used)
        used.update(path)
        kappa.append(path)

    used_g: set[Edge] = set()
    gamma = []
    for i in range(0, len(disorder), 2):
        path = _primal_bfs(domain, disorder[i], disorder[i + 1], used_g)
        used_g.update(path)
        gamma.append(path)

    return DefectPaths(kappa=tuple(kappa), gamma=tuple(gamma))
