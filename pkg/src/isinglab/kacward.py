"""Kac-Ward transition matrix and its defect modifications.

For oriented edges e, e' of the domain, the transition matrix is

    T[e, e'] = sqrt(x_e * x_e') * exp(i/2 * wind(e, e'))

whenever e' continues e (starts at the head of e, e' != reversed e), zero
otherwise.  With J[e, e'] = delta(reversed e, e'), the matrix
K = J (Id - T) is self-adjoint, and conjugating with U = diag(eta_e) gives
the real antisymmetric matrix Khat = i U* K U whose Pfaffian is (up to sign)
the partition function of the Ising model on the faces of the domain with
plus boundary conditions.

Branch cuts (spin insertions) flip the K[e, reversed e] = +1 entries to -1
on edges crossing the cut; disorder lines invert the edge weight
x -> 1/x along the line and record the scalar prefactor prod(x_e).
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import lattice
from .errors import NonRealResidue, PathOutsideDomain
from .lattice import DefectPaths, Domain, Edge, OrientedEdge
from .pfaffian import AntisymMatrix

IMAG_RESIDUE_TOL = 1e-10
SELF_DUAL_X = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class ModelParams:
    """Homogeneous angle parameter with optional per-edge overrides.

    x_e = tan(theta_e / 2) is the low-temperature expansion weight and
    t_e = (x_e + 1/x_e)^(1/2) the fermionic normalization.  theta must lie
    in (0, pi/2); the self-dual (critical) point is theta = pi/4 where
    x = sqrt(2) - 1.
    """

    theta: float = math.pi / 4
    theta_overrides: dict[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        for th in [self.theta, *self.theta_overrides.values()]:
            if not 0.0 < th < math.pi / 2:
                raise ValueError(f"theta {th} outside (0, pi/2)")

    def theta_edge(self, e: Edge) -> float:
        return self.theta_overrides.get(e, self.theta)

    def x(self, e: Edge) -> float:
        return math.tan(self.theta_edge(e) / 2.0)

    def t(self, e: Edge) -> float:
        x = self.x(e)
        return math.sqrt(x + 1.0 / x)


def critical_params() -> ModelParams:
    return ModelParams(theta=math.pi / 4)


@dataclass(frozen=True)
class KacWardAssembly:
    """Assembled matrices plus the record of applied defect modifications."""

    domain: Domain
    params: ModelParams
    T: np.ndarray
    K: np.ndarray
    khat: AntisymMatrix
    eta: np.ndarray
    branch_flips: frozenset[Edge] = frozenset()
    disorder_edges: frozenset[Edge] = frozenset()
    log_prefactor: float = 0.0

    @property
    def modification_log(self) -> str:
        return json.dumps({
            "branch_flips": sorted(map(str, self.branch_flips)),
            "disorder_edges": sorted(map(str, self.disorder_edges)),
            "log_prefactor": self.log_prefactor,
        })

    def dump_matrix(self, path_prefix: str) -> None:
        """Binary row-major dump of Khat with a JSON index header."""
        self.khat.entries.astype(np.float64).tofile(path_prefix + ".bin")
        header = {
            "dimension": self.khat.n,
            "index_map": [list(map(list, oe)) for oe in self.domain.oriented_edges],
        }
        with open(path_prefix + ".json", "w", encoding="utf-8") as fh:
            json.dump(header, fh)


def _edge_x(domain: Domain, params: ModelParams,
            inverted: frozenset[Edge]) -> np.ndarray:
    x = np.empty(len(domain.edges))
    for i, e in enumerate(domain.edges):
        xe = params.x(e)
        x[i] = 1.0 / xe if e in inverted else xe
    return x


def _assemble_matrices(domain: Domain, params: ModelParams,
                       branch_flips: frozenset[Edge],
                       disorder_edges: frozenset[Edge]):
    n = domain.n_oriented
    oes = domain.oriented_edges
    oidx = domain.oe_index
    xs = _edge_x(domain, params, disorder_edges)

    heads: dict[lattice.Coord, list[int]] = {}
    for j, oe in enumerate(oes):
        heads.setdefault(oe[0], []).append(j)  # edges leaving a vertex

    T = np.zeros((n, n), dtype=complex)
    for i, e in enumerate(oes):
        xe = xs[domain.edge_index[lattice.edge_key(*e)]]
        de = lattice.direction(e)
        rev = oidx[lattice.reverse(e)]
        for j in heads.get(e[1], ()):
            if j == rev:
                continue
            ep = oes[j]
            xep = xs[domain.edge_index[lattice.edge_key(*ep)]]
            w = lattice.wind(de, lattice.direction(ep))
            T[i, j] = math.sqrt(xe * xep) * cmath.exp(0.5j * w)

    K = np.eye(n, dtype=complex) - T
    # left-multiply by J: row e of K becomes row reversed(e) of (Id - T)
    perm = np.array([oidx[lattice.reverse(oe)] for oe in oes])
    K = K[perm, :]

    if branch_flips:
        for e in branch_flips:
            if not domain.has_edge(e):
                raise PathOutsideDomain(f"branch cut crosses non-domain edge {e}")
            a, b = oidx[(e[0], e[1])], oidx[(e[1], e[0])]
            K[a, b] = -K[a, b]
            K[b, a] = -K[b, a]

    eta = np.array([lattice.eta_edge(oe) for oe in oes])
    khat_c = 1j * (eta.conjugate()[:, None] * K * eta[None, :])
    imag_res = np.abs(khat_c.imag).max() if n else 0.0
    if imag_res > IMAG_RESIDUE_TOL:
        raise NonRealResidue(f"imaginary residue {imag_res:.3e}")
    real = khat_c.real
    exact = (real - real.T) / 2.0
    sym_res = np.abs(real - exact).max() if n else 0.0
    if sym_res > IMAG_RESIDUE_TOL:
        raise NonRealResidue(f"antisymmetry residue {sym_res:.3e}")
    khat = AntisymMatrix(exact, index_map={oe: i for i, oe in enumerate(oes)})
    return T, K, khat, eta


def assemble(domain: Domain, params: ModelParams) -> KacWardAssembly:
    """Build T, K and Khat for a domain; raises NonRealResidue on eta bugs."""
    T, K, khat, eta = _assemble_matrices(domain, params, frozenset(), frozenset())
    return KacWardAssembly(domain=domain, params=params, T=T, K=K, khat=khat,
                           eta=eta)


def apply_branch_cuts(asm: KacWardAssembly, kappa: DefectPaths) -> KacWardAssembly:
    """New assembly with backtracking entries flipped along the cuts.

    Edges crossed an even number of times cancel; the effective flip set is
    the symmetric difference accumulated by the path collection, composed
    with any flips already present.
    """
    kappa.validate(asm.domain)
    flips = frozenset(asm.branch_flips ^ kappa.kappa_crossed)
    T, K, khat, eta = _assemble_matrices(asm.domain, asm.params, flips,
                                         asm.disorder_edges)
    return replace(asm, T=T, K=K, khat=khat, branch_flips=flips)


def apply_disorder_lines(asm: KacWardAssembly, gamma: DefectPaths) -> KacWardAssembly:
    """New assembly with x -> 1/x along the disorder lines.

    The scalar prefactor prod_{e in gamma} x_e is recorded in log space so
    that prefactor * |Pf(Khat_gamma)| equals the defect partition function
    with odd-degree constraints at the line endpoints.
    """
    gamma.validate(asm.domain)
    inverted = frozenset(asm.disorder_edges ^ gamma.gamma_edges)
    logpf = sum(math.log(asm.params.x(e)) for e in inverted)
    T, K, khat, eta = _assemble_matrices(asm.domain, asm.params,
                                         asm.branch_flips, inverted)
    return replace(asm, T=T, K=K, khat=khat, disorder_edges=inverted,
                   log_prefactor=logpf)
