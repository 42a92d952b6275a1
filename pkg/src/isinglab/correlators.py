"""Public correlator API on top of the Kac-Ward Pfaffian machinery.

Pure spin correlators with plus boundary conditions are positive, so they
are reported as the magnitude of the Pfaffian ratio with the raw sign of
the ratio logged separately; the sign of the ratio depends on the chosen
edge ordering and defect paths and is not physical on its own.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import lattice, oracle, pfaffian
from .errors import BoundaryEdge, FaceOutsideDomain, VertexOutsideDomain
from .kacward import KacWardAssembly, ModelParams, apply_branch_cuts, \
    apply_disorder_lines, assemble
from .lattice import Corner, DefectPaths, Domain, Edge, OrientedEdge
from .pfaffian import SignLog, inverse_columns, pfaffian_signlog


@dataclass(frozen=True)
class CorrelatorReport:
    """Result record for one correlator evaluation."""

    quantity: str
    value: float
    raw_sign: float
    theta: float
    insertions: tuple = ()
    log_value: float | None = None
    modification_log: str = ""
    condition_warning: str | None = None
    residuals: dict | None = None

    def to_json(self) -> str:
        return json.dumps({
            "quantity": self.quantity,
            "insertions": [list(map(list, i)) if isinstance(i, tuple) and i
                           and isinstance(i[0], tuple) else list(i)
                           for i in self.insertions],
            "theta": self.theta,
            "value": self.value,
            "raw_sign": self.raw_sign,
            "residuals": self.residuals or {},
        })


def _pf(asm: KacWardAssembly) -> SignLog:
    return pfaffian_signlog(asm.khat)


def partition_function(domain: Domain, params: ModelParams) -> CorrelatorReport:
    """Z as |Pf(Khat)|; the log value is always finite, the plain value may
    overflow to inf on large domains."""
    asm = assemble(domain, params)
    pf = _pf(asm)
    value = math.exp(pf.log_abs) if pf.log_abs < 700 else math.inf
    return CorrelatorReport(quantity="partition", value=value,
                            raw_sign=pf.sign, theta=params.theta,
                            log_value=pf.log_abs,
                            condition_warning=pf.condition_warning)


def _check_faces(domain: Domain, faces: Sequence[lattice.Coord]) -> None:
    if len(set(faces)) != len(list(faces)):
        raise FaceOutsideDomain("faces must be distinct")
    for u in faces:
        if u not in domain.faces:
            raise FaceOutsideDomain(f"face {u} not in domain")


def spin_correlator(domain: Domain, params: ModelParams,
                    faces: Sequence[lattice.Coord],
                    kappa: DefectPaths | None = None,
                    asm: KacWardAssembly | None = None,
                    method: str = "pfaffian") -> CorrelatorReport:
    """E[sigma_u1 ... sigma_um] = |Pf(Khat with cuts) / Pf(Khat)|.

    method="det" computes the same magnitude through the determinant
    cross-check route (no sign information) which is faster on large
    domains.
    """
    _check_faces(domain, faces)
    if not faces:
        return CorrelatorReport(quantity="spin", value=1.0, raw_sign=1.0,
                                theta=params.theta)
    if kappa is None:
        kappa = lattice.default_defect_paths(domain, faces, ())
    if asm is None:
        asm = assemble(domain, params)
    mod = apply_branch_cuts(asm, kappa)
    if method == "det":
        ratio = pfaffian.slogdet_ratio(mod.khat.entries, asm.khat.entries)
    else:
        ratio = _pf(mod) / _pf(asm)
    return CorrelatorReport(quantity="spin", value=math.exp(ratio.log_abs),
                            raw_sign=ratio.sign, theta=params.theta,
                            insertions=tuple(faces),
                            log_value=ratio.log_abs,
                            modification_log=mod.modification_log,
                            condition_warning=ratio.condition_warning)


def disorder_correlator(domain: Domain, params: ModelParams,
                        vertices: Sequence[lattice.Coord],
                        gamma: DefectPaths | None = None,
                        asm: KacWardAssembly | None = None) -> CorrelatorReport:
    """< mu_v1 ... mu_v2n > by weight inversion along the disorder lines."""
    if len(set(vertices)) != len(list(vertices)):
        raise VertexOutsideDomain("vertices must be distinct")
    if len(vertices) % 2 != 0:
        raise VertexOutsideDomain("even number of disorder vertices required")
    if not vertices:
        return CorrelatorReport(quantity="disorder", value=1.0, raw_sign=1.0,
                                theta=params.theta)
    for v in vertices:
        if not domain.edges_at_vertex(v):
            raise VertexOutsideDomain(f"vertex {v} not in domain")
    if gamma is None:
        gamma = lattice.default_defect_paths(domain, (), vertices)
    if asm is None:
        asm = assemble(domain, params)
    mod = apply_disorder_lines(asm, gamma)
    ratio = _pf(mod) / _pf(asm)
    return CorrelatorReport(quantity="disorder",
                            value=math.exp(mod.log_prefactor + ratio.log_abs),
                            raw_sign=ratio.sign, theta=params.theta,
                            insertions=tuple(vertices),
                            log_value=mod.log_prefactor + ratio.log_abs,
                            modification_log=mod.modification_log,
                            condition_warning=ratio.condition_warning)


def mixed_correlator(domain: Domain, params: ModelParams,
                     vertices: Sequence[lattice.Coord],
                     faces: Sequence[lattice.Coord],
                     paths: DefectPaths | None = None,
                     asm: KacWardAssembly | None = None) -> CorrelatorReport:
    """|< mu...mu sigma...sigma >| via composed branch cuts and disorder lines.

    The magnitude is independent of the chosen paths; the raw sign encodes
    the sheet declaration implied by them (deforming a cut across a
    disorder vertex flips it).
    """
    _check_faces(domain, faces)
    if len(vertices) % 2 != 0:
        raise VertexOutsideDomain("even number of disorder vertices required")
    if paths is None:
        paths = lattice.default_defect_paths(domain, faces, vertices)
    if asm is None:
        asm = assemble(domain, params)
    mod = apply_disorder_lines(apply_branch_cuts(asm, paths), paths)
    ratio = _pf(mod) / _pf(asm)
    return CorrelatorReport(quantity="mixed",
                            value=math.exp(mod.log_prefactor + ratio.log_abs),
                            raw_sign=ratio.sign, theta=params.theta,
                            insertions=(tuple(vertices), tuple(faces)),
                            log_value=mod.log_prefactor + ratio.log_abs,
                            modification_log=mod.modification_log,
                            condition_warning=ratio.condition_warning)


def edge_spin_pair(domain: Domain, params: ModelParams, e: Edge,
                   asm: KacWardAssembly | None = None) -> float:
    """E[sigma_{u-} sigma_{u+}] across an edge; the outer face carries +1."""
    f1, f2 = domain.faces_of_edge(e)
    faces = [f for f in (f1, f2) if f != lattice.OUTER]
    return spin_correlator(domain, params, faces, asm=asm).value


# ---------------------------------------------------------------------------
# fermionic observables
# ---------------------------------------------------------------------------


def fermion_multipoint(domain: Domain, params: ModelParams,
                       edges: Sequence[OrientedEdge],
                       asm: KacWardAssembly | None = None) -> float:
    """< phi_e1 ... phi_e2k > as the Pfaffian of the inverse-matrix block."""
    if asm is None:
        asm = assemble(domain, params)
    idx = [domain.oe_index[e] for e in edges]
    cols = inverse_columns(asm.khat, idx)
    block = np.array([[cols[j][i] for j in idx] for i in idx])
    return pfaffian.pfaffian_of_submatrix(block)


def fermion_two_point(domain: Domain, params: ModelParams,
                      a: OrientedEdge, e: OrientedEdge,
                      asm: KacWardAssembly | None = None) -> float:
    """Phi_G(a, e) = t_a t_e <phi_e phi_a>."""
    if e == a:
        raise ValueError("insertions must be distinct")
    if asm is None:
        asm = assemble(domain, params)
    ta = params.t(lattice.edge_key(*a))
    te = params.t(lattice.edge_key(*e))
    col = inverse_columns(asm.khat, [domain.oe_index[a]])[domain.oe_index[a]]
    return ta * te * col[domain.oe_index[e]]


def fermion_observable_field(domain: Domain, params: ModelParams,
                             a: OrientedEdge,
                             asm: KacWardAssembly | None = None
                             ) -> dict[Edge, complex]:
    """F_G(a, z_e) on every mid-edge, from one column of the inverse.

    F(a, z_e) = t_a t_e (eta_e <phi_e phi_a> + eta_ebar <phi_ebar phi_a>);
    the value at the source's own mid-edge is included (its phi_a term
    vanishes identically).
    """
    if asm is None:
        asm = assemble(domain, params)
    ai = domain.oe_index[a]
    col = inverse_columns(asm.khat, [ai])[ai]
    ta = params.t(lattice.edge_key(*a))
    out: dict[Edge, complex] = {}
    for ek in domain.edges:
        e1, e2 = lattice.oriented(ek)
        te = params.t(ek)
        out[ek] = ta * te * (
            lattice.eta_edge(e1) * col[domain.oe_index[e1]]
            + lattice.eta_edge(e2) * col[domain.oe_index[e2]])
    return out


def fermion_observable_F(domain: Domain, params: ModelParams,
                         source, z_edge: Edge,
                         asm: KacWardAssembly | None = None) -> complex:
    """F_G(source, z_e) for an oriented-edge or corner source.

    Edge sources go through the matrix inverse; corner sources fall back to
    the combinatorial sum (enumeration-scale domains only).
    """
    if lattice.is_vertex(source[0]):
        if z_edge == lattice.edge_key(*source):
            raise ValueError("z coincides with the source mid-edge")
        return fermion_observable_field(domain, params, source, asm)[z_edge]
    return oracle.spinor_F(domain, params, (), DefectPaths(), source, z_edge)


# ---------------------------------------------------------------------------
# s-holomorphicity and massive harmonicity
# ---------------------------------------------------------------------------


def midedge_side(c: Corner, e: Edge) -> int:
    """+1 when the mid-edge of e lies to the right of the corner decoration."""
    dec = lattice.corner_decoration(c)
    rel = lattice.edge_midpoint(e) - lattice.point(c[0])
    cross = dec.real * rel.imag - dec.imag * rel.real
    return +1 if cross < 0 else -1


def corner_projection(domain: Domain, params: ModelParams,
                      F: Mapping[Edge, complex],
                      side: int = +1) -> dict[Corner, float]:
    """Real corner values induced by a mid-edge function through the
    projection Re[exp(side * i/2 * (pi/4 - theta)) conj(eta_d) F(z_e)],
    evaluated on the adjacent mid-edge lying on the requested side."""
    out: dict[Corner, float] = {}
    phase = cmath.exp(side * 0.5j * (math.pi / 4 - params.theta))
    for c in domain.corners:
        for e in domain.corner_edges(c):
            if e in F and midedge_side(c, e) == side:
                out[c] = (phase * lattice.eta_corner(c).conjugate() * F[e]).real
    return out


def check_s_holomorphicity(domain: Domain, params: ModelParams,
                           F: Mapping[Edge, complex],
                           Phi: Mapping[Corner, float],
                           exclusions: Iterable = ()) -> float:
    """Max residual of the projection relation over adjacent (z_e, corner)
    pairs, skipping excluded mid-edges and corners."""
    excl = set(exclusions)
    worst = 0.0
    for c, val in Phi.items():
        if c in excl:
            continue
        etabar = lattice.eta_corner(c).conjugate()
        for e in domain.corner_edges(c):
            if e not in F or e in excl:
                continue
            side = midedge_side(c, e)
            phase = cmath.exp(side * 0.5j * (math.pi / 4 - params.theta))
            worst = max(worst, abs(val - (phase * etabar * F[e]).real))
    return worst


def check_massive_harmonicity(domain: Domain, params: ModelParams,
                              Phi: Mapping[Corner, float],
                              exclusions: Iterable = ()) -> float:
    """Max of |Phi(d) - 1/4 sin(2 theta) sum of same-type neighbors| over
    corners whose four neighbors are available."""
    excl = set(exclusions)
    coef = 0.25 * math.sin(2 * params.theta)
    by_key: dict[tuple, float] = {}
    for (f, v), val in Phi.items():
        by_key[(f, (v[0] - f[0], v[1] - f[1]))] = val
    worst = 0.0
    for (f, v), val in Phi.items():
        if (f, v) in excl:
            continue
        dv = (v[0] - f[0], v[1] - f[1])
        nbrs = []
        for dk, ds in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
            key = ((f[0] + dk, f[1] + ds), dv)
            if key not in by_key:
                break
            if (key[0], (key[0][0] + dv[0], key[0][1] + dv[1])) in excl:
                break
            nbrs.append(by_key[key])
        else:
            worst = max(worst, abs(val - coef * sum(nbrs)))
    return worst


# ---------------------------------------------------------------------------
# energy density, spinor ratio
# ---------------------------------------------------------------------------


def energy_counterterm(theta: float) -> float:
    """Additive counterterm (pi - 2 theta)/(pi cos theta) in the spin form."""
    return (math.pi - 2 * theta) / (math.pi * math.cos(theta))


def energy_infinity(theta: float) -> float:
    """Value at the removed singularity: (sin t)^-1 [1 + (pi-2t)/(pi cos t)]."""
    return (1.0 + energy_counterterm(theta)) / math.sin(theta)


def energy_density(domain: Domain, params: ModelParams, e: Edge,
                   asm: KacWardAssembly | None = None) -> CorrelatorReport:
    """E[eps_e] = (sin theta)^-1 [E[sigma sigma] - (pi-2theta)/(pi cos theta)]."""
    if not domain.is_interior_edge(e):
        raise BoundaryEdge(f"edge {e} touches the outer face")
    th = params.theta_edge(e)
    spin = edge_spin_pair(domain, params, e, asm=asm)
    val = (spin - energy_counterterm(th)) / math.sin(th)
    return CorrelatorReport(quantity="energy", value=val,
                            raw_sign=math.copysign(1.0, val),
                            theta=params.theta, insertions=(e,))


def energy_density_via_disorder(domain: Domain, params: ModelParams, e: Edge,
                                asm: KacWardAssembly | None = None) -> float:
    """(cos theta)^-1 [2 theta/(pi sin theta) - <mu mu>] cross-check form."""
    th = params.theta_edge(e)
    mu = disorder_correlator(domain, params, list(e), asm=asm).value
    return (2 * th / (math.pi * math.sin(th)) - mu) / math.cos(th)


def energy_density_via_fermions(domain: Domain, params: ModelParams, e: Edge,
                                asm: KacWardAssembly | None = None) -> float:
    """i eta_e conj(eta_ebar) Phi(ebar, e) - eps_infinity cross-check form."""
    th = params.theta_edge(e)
    e1, e2 = lattice.oriented(e)
    phi = fermion_two_point(domain, params, e2, e1, asm=asm)
    coef = 1j * lattice.eta_edge(e1) * lattice.eta_edge(e2).conjugate()
    assert abs(coef.imag) < 1e-12
    return coef.real * phi - energy_infinity(th)


def spinor_ratio(domain: Domain, params: ModelParams,
                 branch_faces: Sequence[lattice.Coord],
                 moved_face: lattice.Coord,
                 asm: KacWardAssembly | None = None) -> CorrelatorReport:
    """Ratio E[sigma_moved sigma_u2...] / E[sigma_u1 sigma_u2...].

    This is the lattice value of the spinor observable at the corner next
    to u1 in the direction of the move; the moved face must be a cornerwise
    neighbor of branch_faces[0] (or equal to it, giving 1).
    """
    u1, rest = branch_faces[0], list(branch_faces[1:])
    if moved_face != u1:
        dk, ds = moved_face[0] - u1[0], moved_face[1] - u1[1]
        if (dk, ds) not in ((2, 0), (-2, 0), (0, 2), (0, -2)):
            raise FaceOutsideDomain("moved face must be a cornerwise neighbor")
        if moved_face in rest:
            raise FaceOutsideDomain("moved face collides with other insertions")
    num = spin_correlator(domain, params, [moved_face, *rest], asm=asm)
    den = spin_correlator(domain, params, [u1, *rest], asm=asm)
    val = math.exp(num.log_value - den.log_value)
    return CorrelatorReport(quantity="spinor_ratio", value=val,
                            raw_sign=num.raw_sign * den.raw_sign,
                            theta=params.theta,
                            insertions=(tuple(branch_faces), moved_face))
