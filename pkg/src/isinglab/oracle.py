"""Brute-force ground truth by exhaustive enumeration.

Everything here is slow and exact: partition functions and correlators are
computed straight from their defining sums over spin configurations or over
subgraphs with prescribed vertex-degree parities, with winding angles and
double-cover sheets tracked explicitly.  The Pfaffian route is validated
against these sums on small domains.

Sign conventions for the signed subgraph sums:

* A configuration contributing to a 2k-point expectation decomposes into
  closed loops plus k open walks pairing the insertions.  A walk from
  insertion p to insertion q starts along the direction of p (an oriented
  edge leaves its midpoint towards its head; a corner decoration leaves the
  face center towards its vertex) and ends travelling against the direction
  of q.  Its contribution is ``i * eta_p * conj(eta_q) * exp(-i*wind/2)``
  with ``wind`` the total turning angle, and the pairing order carries the
  permutation sign.  Walk reversal is consistent: traversing the same walk
  backwards gives the same contribution once the permutation sign flips.
* Closed loops carry no winding factor; for double covers they contribute
  the parity of the branch faces they enclose, and open walks contribute a
  sheet sign counting their crossings with the branch cuts.
* Degree-4 (and higher) vertices are resolved by a fixed non-crossing
  matching of the incident strands, pairing angular neighbors; the signed
  sum is independent of which non-crossing matching is chosen.
"""

from __future__ import annotations

import cmath
import math
from typing import Iterable, Sequence

import numpy as np

from . import lattice
from .errors import TooLarge
from .kacward import ModelParams
from .lattice import Corner, DefectPaths, Domain, Edge, OrientedEdge

MAX_SUBSETS = 2**24
_CHUNK = 2**20

_EIGHTH = math.pi / 4.0


def _insertion_is_edge(ins) -> bool:
    # oriented edges join two vertices (odd parity); corners start at a face
    return lattice.is_vertex(ins[0])


def _ray_crossing_row(domain: Domain, face) -> np.ndarray:
    """Indicator over domain edges: does the horizontal ray from the face
    center (towards +k) cross the edge?  Half-open rule, exact integers."""
    k0, s0 = face
    row = np.zeros(len(domain.edges), dtype=np.uint8)
    for i, ((x1, y1), (x2, y2)) in enumerate(domain.edges):
        if (y1 > s0) == (y2 > s0):
            continue
        x_at = x1 + (s0 - y1) * (x2 - x1) // (y2 - y1)
        if x_at > k0:
            row[i] = 1
    return row


def _mask_bits(n_free: int):
    """Yield chunks of the 2^n_free subset table as uint8 bit matrices."""
    total = 1 << n_free
    if total > MAX_SUBSETS:
        raise TooLarge(f"2^{n_free} subsets exceed the enumeration cap")
    shifts = np.arange(n_free, dtype=np.uint64)
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        masks = np.arange(start, stop, dtype=np.uint64)
        yield ((masks[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def _parity_survivors(inc: np.ndarray, target: np.ndarray, logw: np.ndarray):
    """All subsets with the prescribed degree parities.

    Returns (bits, weights) where bits is the (n_survivors, n_free) subset
    table and weights the product of edge weights per survivor.
    """
    rows = []
    weights = []
    n_free = inc.shape[1]
    for bits in _mask_bits(n_free):
        par = (bits @ inc.T) & 1
        keep = np.all(par == target[None, :], axis=1)
        if keep.any():
            kept = bits[keep]
            rows.append(kept)
            weights.append(np.exp(kept.astype(float) @ logw))
    if not rows:
        return np.zeros((0, n_free), dtype=np.uint8), np.zeros(0)
    return np.concatenate(rows), np.concatenate(weights)


def _free_edge_setup(domain: Domain, params: ModelParams,
                     odd_vertices: Sequence[lattice.Coord] = (),
                     skip_edges: Iterable[Edge] = (),
                     half_heads: Iterable[lattice.Coord] = ()):
    """Incidence data for enumeration over the free (unconstrained) edges."""
    skip = set(skip_edges)
    free = [e for e in domain.edges if e not in skip]
    vlist = list(domain.vertices)
    vidx = {v: i for i, v in enumerate(vlist)}
    inc = np.zeros((len(vlist), len(free)), dtype=np.uint8)
    for j, (v, w) in enumerate(free):
        inc[vidx[v], j] ^= 1
        inc[vidx[w], j] ^= 1
    target = np.zeros(len(vlist), dtype=np.uint8)
    for v in odd_vertices:
        target[vidx[v]] ^= 1
    for v in half_heads:
        target[vidx[v]] ^= 1
    logw = np.array([math.log(params.x(e)) for e in free])
    return free, inc, target, logw


def enumerate_Z(domain: Domain, params: ModelParams) -> float:
    """Partition function as the sum over even subgraphs."""
    free, inc, target, logw = _free_edge_setup(domain, params)
    _, w = _parity_survivors(inc, target, logw)
    return float(w.sum())


def enumerate_defect_Z(domain: Domain, params: ModelParams,
                       odd_vertices: Sequence[lattice.Coord]) -> float:
    """Sum over subgraphs with odd degree exactly at the given vertices."""
    free, inc, target, logw = _free_edge_setup(domain, params, odd_vertices)
    _, w = _parity_survivors(inc, target, logw)
    return float(w.sum())


def enumerate_disorders(domain: Domain, params: ModelParams,
                        vertices: Sequence[lattice.Coord]) -> float:
    if len(vertices) % 2 != 0:
        raise ValueError("even number of disorder vertices required")
    if not vertices:
        return 1.0
    return (enumerate_defect_Z(domain, params, vertices)
            / enumerate_Z(domain, params))


def enumerate_spins(domain: Domain, params: ModelParams,
                    faces: Sequence[lattice.Coord],
                    route: str = "spins") -> float:
    """E[sigma_u1 ... sigma_um] with plus boundary conditions.

    route="spins": direct sum over the 2^(#faces) spin configurations.
    route="loops": signed sum over even subgraphs weighting each
    configuration by the enclosure parity of the marked faces.
    """
    for u in faces:
        if u not in domain.faces:
            raise ValueError(f"face {u} outside domain")
    if route == "loops":
        free, inc, target, logw = _free_edge_setup(domain, params)
        bits, w = _parity_survivors(inc, target, logw)
        sign = np.ones(len(w))
        for u in faces:
            row = _ray_crossing_row(domain, u)
            par = (bits @ row) & 1
            sign *= 1.0 - 2.0 * par
        return float((w * sign).sum() / w.sum())

    flist = sorted(domain.faces)
    nf = len(flist)
    if 2**nf > MAX_SUBSETS:
        raise TooLarge(f"2^{nf} spin configurations exceed the cap")
    fidx = {f: i for i, f in enumerate(flist)}
    spins = 1.0 - 2.0 * (((np.arange(1 << nf, dtype=np.uint64)[:, None]
                           >> np.arange(nf, dtype=np.uint64)[None, :]) & 1)
                         .astype(float))
    logwall = np.zeros(1 << nf)
    for e in domain.edges:
        f1, f2 = domain.faces_of_edge(e)
        lx = math.log(params.x(e))
        s1 = spins[:, fidx[f1]] if f1 != lattice.OUTER else 1.0
        s2 = spins[:, fidx[f2]] if f2 != lattice.OUTER else 1.0
        logwall = logwall + lx * 0.5 * (1.0 - s1 * s2)
    w = np.exp(logwall)
    obs = np.ones(1 << nf)
    for u in faces:
        obs = obs * spins[:, fidx[u]]
    return float((w * obs).sum() / w.sum())


def enumerate_mixed(domain: Domain, params: ModelParams,
                    vertices: Sequence[lattice.Coord],
                    faces: Sequence[lattice.Coord],
                    gamma_edges: frozenset[Edge]) -> float:
    """Signed mixed correlator < mu ... mu sigma ... sigma >.

    The disorder lift is fixed by the line collection ``gamma_edges``: each
    configuration P with odd degrees at the disorder vertices is weighted by
    the enclosure parity of the marked faces computed from P xor gamma.
    The overall sign depends on that choice; magnitudes do not.
    """
    free, inc, target, logw = _free_edge_setup(domain, params, vertices)
    bits, w = _parity_survivors(inc, target, logw)
    gamma_row = np.array([1 if e in gamma_edges else 0 for e in free],
                         dtype=np.uint8)
    sign = np.ones(len(w))
    for u in faces:
        row = _ray_crossing_row(domain, u)
        par = ((bits ^ gamma_row[None, :]) @ row) & 1
        sign *= 1.0 - 2.0 * par
    z = enumerate_Z(domain, params)
    return float((w * sign).sum() / z)


# ---------------------------------------------------------------------------
# signed subgraph sums with insertions (fermions, corners, spinors)
# ---------------------------------------------------------------------------


class _Strand:
    """One strand incident to a vertex: a full edge, an insertion half-edge,
    or a corner decoration stub."""

    __slots__ = ("kind", "key", "vertex", "outward", "other")

    def __init__(self, kind, key, vertex, outward, other=None):
        self.kind = kind          # "edge" | "half" | "stub"
        self.key = key            # edge key | insertion index | insertion index
        self.vertex = vertex      # attachment vertex
        self.outward = outward    # unit direction pointing away from vertex
        self.other = other        # far vertex for full edges


def _turn_eighths(d_in: complex, d_out: complex) -> int:
    ang = cmath.phase(d_out / d_in)
    n = round(ang / _EIGHTH)
    assert abs(ang - n * _EIGHTH) < 1e-9 and -4 < n <= 4
    return n


def _noncrossing_matching(strands: list[_Strand], resolution: int) -> dict:
    """Pair the strands at one vertex without crossings.

    Strands are sorted by outward angle; resolution 0 pairs angular
    neighbors (0,1),(2,3),...; resolution 1 uses the rotated pairing
    (1,2),(3,4),...,(last,0).  Both are non-crossing.
    """
    order = sorted(strands, key=lambda s: cmath.phase(s.outward))
    n = len(order)
    assert n % 2 == 0
    match = {}
    idx = list(range(n))
    if resolution:
        idx = idx[1:] + idx[:1]
    for i in range(0, n, 2):
        a, b = order[idx[i]], order[idx[i + 1]]
        match[id(a)] = b
        match[id(b)] = a
    return match


def grassmann_expectation(domain: Domain, params: ModelParams,
                          insertions: Sequence[OrientedEdge | Corner],
                          branch_faces: Sequence[lattice.Coord] = (),
                          kappa: DefectPaths | None = None,
                          resolution: int = 0) -> complex:
    """Combinatorial 2k-point expectation of edge/corner Grassmann generators.

    ``insertions`` lists oriented edges (phi variables) and corners (chi
    variables); the result is the expectation in the written order.  With
    ``branch_faces`` given, the sum carries the double-cover weights (loop
    enclosure parities and sheet signs counted against the cuts in
    ``kappa``) and is normalized by Z * E[sigma_u1...sigma_um]; otherwise it
    is normalized by Z.
    """
    if len(insertions) % 2 != 0:
        raise ValueError("even number of insertions required")
    if len(set(insertions)) != len(insertions):
        raise ValueError("insertions must be distinct")
    if branch_faces and kappa is None:
        raise ValueError("kappa paths required with branch faces")
    kappa_edges = kappa.kappa_crossed if kappa is not None else frozenset()

    # classify insertions
    etas: list[complex] = []
    skip_edges: set[Edge] = set()
    half_heads: list[lattice.Coord] = []
    stub_vertices: list[lattice.Coord] = []
    fixed_strands: list[tuple[int, _Strand]] = []   # (insertion index, strand)
    degenerate_pairs: list[tuple[int, int]] = []
    half_log_x = 0.0
    edge_ins = {ins: i for i, ins in enumerate(insertions) if _insertion_is_edge(ins)}
    for i, ins in enumerate(insertions):
        if _insertion_is_edge(ins):
            oe: OrientedEdge = ins  # type: ignore[assignment]
            ek = lattice.edge_key(*oe)
            if not domain.has_edge(ek):
                raise ValueError(f"insertion edge {oe} outside domain")
            etas.append(lattice.eta_edge(oe))
            rev = lattice.reverse(oe)
            if rev in edge_ins:
                skip_edges.add(ek)
                if i < edge_ins[rev]:
                    degenerate_pairs.append((i, edge_ins[rev]))
                continue
            skip_edges.add(ek)
            head = oe[1]
            half_heads.append(head)
            half_log_x += 0.5 * math.log(params.x(ek))
            # outward from the head towards the midpoint: against the edge
            fixed_strands.append((i, _Strand("half", i, head,
                                             -lattice.direction(oe))))
        else:
            c: Corner = ins  # type: ignore[assignment]
            if c[0] not in domain.faces:
                raise ValueError(f"corner face {c[0]} outside domain")
            etas.append(lattice.eta_corner(c))
            stub_vertices.append(c[1])
            fixed_strands.append((i, _Strand("stub", i, c[1],
                                             -lattice.corner_decoration(c))))

    free, inc, target, logw = _free_edge_setup(
        domain, params,
        odd_vertices=stub_vertices,
        skip_edges=skip_edges,
        half_heads=half_heads)
    bits, weights = _parity_survivors(inc, target, logw)
    weights = weights * math.exp(half_log_x)

    ray_rows = [_ray_crossing_row(domain, u) for u in branch_faces]
    free_ray = (np.array([[row[domain.edge_index[e]] for e in free]
                          for row in ray_rows], dtype=np.uint8)
                if ray_rows else None)
    free_kappa = np.array([1 if e in kappa_edges else 0 for e in free],
                          dtype=np.uint8)

    total = 0.0 + 0.0j
    for row, xw in zip(bits, weights):
        present = [free[j] for j in np.nonzero(row)[0]]
        contrib = _config_sign(domain, insertions, etas, fixed_strands,
                               degenerate_pairs, present, free, row,
                               free_ray, free_kappa, resolution)
        total += xw * contrib

    if branch_faces:
        free0, inc0, target0, logw0 = _free_edge_setup(domain, params)
        bits0, w0 = _parity_survivors(inc0, target0, logw0)
        sgn = np.ones(len(w0))
        for row in ray_rows:
            rr = np.array([row[domain.edge_index[e]] for e in free0],
                          dtype=np.uint8)
            sgn *= 1.0 - 2.0 * ((bits0 @ rr) & 1)
        norm = float((w0 * sgn).sum())
    else:
        norm = enumerate_Z(domain, params)
    return total / norm


def _config_sign(domain, insertions, etas, fixed_strands, degenerate_pairs,
                 present, free, row, free_ray, free_kappa, resolution):
    """tau-type weight of one configuration: decompose into walks, collect
    winding factors, permutation sign, loop parities and sheet signs."""
    strands_at: dict = {}
    edge_strands: dict[Edge, tuple[_Strand, _Strand]] = {}
    for e in present:
        v, w = e
        dvw = lattice.direction((v, w))
        s1 = _Strand("edge", e, v, dvw, w)
        s2 = _Strand("edge", e, w, -dvw, v)
        edge_strands[e] = (s1, s2)
        strands_at.setdefault(v, []).append(s1)
        strands_at.setdefault(w, []).append(s2)
    for i, st in fixed_strands:
        strands_at.setdefault(st.vertex, []).append(st)

    matchings = {v: _noncrossing_matching(sts, resolution)
                 for v, sts in strands_at.items()}

    used: set[int] = set()
    pairs: list[tuple[int, int, int]] = []   # (from idx, to idx, eighth-turns)
    path_edges: list[list[Edge]] = []
    for i, st in fixed_strands:
        if id(st) in used:
            continue
        used.add(id(st))
        wind8 = 0
        edges_here: list[Edge] = []
        if st.kind == "half":
            d = -st.outward          # travel from midpoint towards the head
        else:
            d = -st.outward          # travel from face center towards vertex
        cur = st
        while True:
            partner = matchings[cur.vertex][id(cur)]
            used.add(id(partner))
            wind8 += _turn_eighths(d, partner.outward)
            d = partner.outward
            if partner.kind == "edge":
                edges_here.append(partner.key)
                far = edge_strands[partner.key]
                nxt = far[0] if far[0].vertex == partner.other else far[1]
                assert nxt is not partner
                used.add(id(nxt))
                cur = nxt
            else:
                pairs.append((i, partner.key, wind8))
                path_edges.append(edges_here)
                break

    for p, q in degenerate_pairs:
        pairs.append((p, q, 0))
        path_edges.append([])

    # permutation sign of (p1, q1, p2, q2, ...)
    seq = [k for pq in pairs for k in pq[:2]]
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign

    value = complex(sign)
    for (p, q, w8), pedges in zip(pairs, path_edges):
        value *= 1j * etas[p] * etas[q].conjugate() * cmath.exp(-0.125j * math.pi * w8)
        if free_kappa is not None and len(pedges):
            crossings = sum(int(free_kappa[free.index(e)]) for e in pedges)
            if crossings % 2:
                value = -value

    if free_ray is not None:
        path_edge_set = {e for pe in path_edges for e in pe}
        loop_row = np.array([b if free[j] not in path_edge_set else 0
                             for j, b in enumerate(row)], dtype=np.uint8)
        par = int((free_ray @ loop_row).sum()) & 1
        if par:
            value = -value
    return value


def fermion_two_point(domain: Domain, params: ModelParams,
                      a: OrientedEdge, e: OrientedEdge) -> float:
    """Phi_G(a, e) = <t_e phi_e t_a phi_a> by enumeration."""
    ta = params.t(lattice.edge_key(*a))
    te = params.t(lattice.edge_key(*e))
    val = grassmann_expectation(domain, params, [e, a])
    assert abs(val.imag) < 1e-10 * (1 + abs(val))
    return ta * te * val.real


def fermion_observable_F(domain: Domain, params: ModelParams,
                         a: OrientedEdge, z_edge: Edge) -> complex:
    """F_G(a, z_e) = <psi(z_e) t_a phi_a> by enumeration."""
    e1, e2 = lattice.oriented(z_edge)
    ta = params.t(lattice.edge_key(*a))
    te = params.t(z_edge)
    return ta * te * (
        lattice.eta_edge(e1) * grassmann_expectation(domain, params, [e1, a])
        + lattice.eta_edge(e2) * grassmann_expectation(domain, params, [e2, a]))


def spinor_phi(domain: Domain, params: ModelParams,
               branch_faces: Sequence[lattice.Coord], kappa: DefectPaths,
               c: Corner, d: Corner, resolution: int = 0) -> float:
    """Spinor observable Phi_[G;u1..um](c, d) by enumeration.

    Corner pairs use the source-first order <chi_c chi_d>: the walk factor is
    ``+i eta_c conj(eta_d) exp(-i wind(c->d)/2)``.  This is the sign for
    which the observable at a corner pair u1^[eta], utilde1^[i eta] sharing a
    vertex equals the positive ratio of spin correlators.
    """
    val = grassmann_expectation(domain, params, [c, d],
                                branch_faces=branch_faces, kappa=kappa,
                                resolution=resolution)
    assert abs(val.imag) < 1e-10 * (1 + abs(val))
    return val.real


def spinor_F(domain: Domain, params: ModelParams,
             branch_faces: Sequence[lattice.Coord], kappa: DefectPaths,
             c: Corner, z_edge: Edge) -> complex:
    """Spinor observable F_[G;u1..um](c, z_e) by enumeration.

    Same source-first corner convention as :func:`spinor_phi`, so the pair
    satisfies the s-holomorphicity projections jointly.
    """
    e1, e2 = lattice.oriented(z_edge)
    te = params.t(z_edge)
    return te * (
        lattice.eta_edge(e1) * grassmann_expectation(
            domain, params, [c, e1], branch_faces=branch_faces, kappa=kappa)
        + lattice.eta_edge(e2) * grassmann_expectation(
            domain, params, [c, e2], branch_faces=branch_faces, kappa=kappa))


def loop_windings(domain: Domain, edge_set: Iterable[Edge],
                  resolution: int = 0) -> list[float]:
    """Total turning angle of each closed walk in an even subgraph.

    Test helper for the winding quantization property; simple loops turn by
    exactly +-2*pi.
    """
    present = sorted(edge_set)
    strands_at: dict = {}
    edge_strands = {}
    for e in present:
        v, w = e
        dvw = lattice.direction((v, w))
        s1 = _Strand("edge", e, v, dvw, w)
        s2 = _Strand("edge", e, w, -dvw, v)
        edge_strands[e] = (s1, s2)
        strands_at.setdefault(v, []).append(s1)
        strands_at.setdefault(w, []).append(s2)
    matchings = {v: _noncrossing_matching(sts, resolution)
                 for v, sts in strands_at.items()}
    used: set[int] = set()
    winds = []
    for e in present:
        start = edge_strands[e][0]
        if id(start) in used:
            continue
        # travel from start.vertex across the edge
        used.add(id(start))
        wind8 = 0
        d = start.outward
        cur_vertex = start.other
        cur = edge_strands[e][1]
        while True:
            used.add(id(cur))
            partner = matchings[cur.vertex][id(cur)]
            wind8 += _turn_eighths(d, partner.outward)
            d = partner.outward
            if partner is start:
                break
            used.add(id(partner))
            far = edge_strands[partner.key]
            cur = far[0] if far[0].vertex == partner.other else far[1]
        winds.append(wind8 * _EIGHTH)
    return winds
