"""Orbifold charts with obstruction bundles, coordinate changes, structures.

A chart is a region ``V`` in R^n with a finite group acting orthogonally
(optionally with translations along periodic angle axes), a trivial bundle
``V x R^k`` with a linear fiber action, and an equivariant section ``s``.
Coordinate changes embed a smaller chart into a larger one.  All identities
are checked on sampled grids.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import default_resolution
from .reports import Report
from .smoothmap import (SmoothMap, compose, const, identity_map, sample_grid,
                        grid_axes, to_fraction)
from .zeros import sample_zero_set

EQUIV_TOL = 1e-10
COCYCLE_TOL = 1e-9
DET_TOL = 1e-8


class GroupTableError(ValueError):
    pass


class CocycleError(ValueError):
    def __init__(self, msg, residual=None, witness=None):
        super().__init__(msg)
        self.residual = residual
        self.witness = witness


def periodic_diff(A, B, periods):
    """``A - B`` with periodic axes reduced to the symmetric interval."""
    D = np.asarray(A, dtype=float) - np.asarray(B, dtype=float)
    for a, per in periods.items():
        D[..., a] = (D[..., a] + 0.5 * per) % per - 0.5 * per
    return D


class FiniteGroupAction:
    """A finite group by multiplication table with V- and E-representations.

    ``table[a][b]`` is the index of ``a*b``.  ``v_matrices`` act orthogonally on
    chart coordinates, ``v_shifts`` (optional) translate periodic axes, and
    ``e_matrices`` act on the obstruction fiber.
    """

    def __init__(self, table, v_matrices, e_matrices, v_shifts=None):
        self.table = np.array(table, dtype=int).reshape(len(table), len(table))
        self.v_matrices = [np.array(m, dtype=float).reshape(np.shape(m) if np.size(m) else (0, 0))
                           for m in v_matrices]
        self.e_matrices = [np.array(m, dtype=float).reshape(np.shape(m) if np.size(m) else (0, 0))
                           for m in e_matrices]
        n = len(self.v_matrices[0]) if self.v_matrices else 0
        if v_shifts is None:
            v_shifts = [np.zeros(n) for _ in self.v_matrices]
        self.v_shifts = [np.array(s, dtype=float).reshape(n) for s in v_shifts]
        self._exact_v = [[[to_fraction(x) for x in row] for row in m] for m in v_matrices]

    @classmethod
    def trivial(cls, n, k):
        return cls([[0]], [np.eye(n)], [np.eye(k)])

    @property
    def order(self):
        return len(self.table)

    @property
    def identity(self):
        for e in range(self.order):
            if np.all(self.table[e] == np.arange(self.order)) and np.all(self.table[:, e] == np.arange(self.order)):
                return e
        raise GroupTableError("multiplication table has no identity")

    def mul(self, a, b):
        return int(self.table[a, b])

    def inverse(self, a):
        e = self.identity
        for b in range(self.order):
            if self.table[a, b] == e:
                return b
        raise GroupTableError("element %d has no inverse" % a)

    def check_table(self):
        """Raise :class:`GroupTableError` unless the table is a group."""
        n = self.order
        t = self.table
        if t.shape != (n, n) or t.min(initial=0) < 0 or t.max(initial=0) >= n:
            raise GroupTableError("multiplication table entries out of range")
        if len(self.v_matrices) != n or len(self.e_matrices) != n:
            raise GroupTableError("need one V-matrix and one E-matrix per group element")
        e = self.identity
        for a in range(n):
            if sorted(t[a]) != list(range(n)) or sorted(t[:, a]) != list(range(n)):
                raise GroupTableError("multiplication table is not a Latin square")
            self.inverse(a)
        for a, b, c in itertools.product(range(n), repeat=3):
            if t[t[a, b], c] != t[a, t[b, c]]:
                raise GroupTableError("multiplication table is not associative at (%d,%d,%d)" % (a, b, c))
        return e

    def check_orthogonal(self, tol=1e-12):
        for g, m in enumerate(self.v_matrices):
            if m.shape[0] != m.shape[1]:
                raise ValueError("V-matrix of element %d is not square" % g)
            if m.size and np.max(np.abs(m.T @ m - np.eye(len(m)))) > tol:
                raise ValueError("V-action matrix of element %d is not orthogonal" % g)
        for g, m in enumerate(self.e_matrices):
            if m.shape[0] != m.shape[1]:
                raise ValueError("E-matrix of element %d is not square" % g)
            if m.size and abs(np.linalg.det(m)) < 1e-12:
                raise ValueError("E-action matrix of element %d is not invertible" % g)

    def act_v(self, g, X):
        X = np.asarray(X, dtype=float)
        return X @ self.v_matrices[g].T + self.v_shifts[g]

    def act_e(self, g, E):
        E = np.asarray(E, dtype=float)
        return E @ self.e_matrices[g].T

    def to_json(self):
        d = {"table": self.table.tolist(),
             "v_matrices": [m.tolist() for m in self.v_matrices],
             "e_matrices": [m.tolist() for m in self.e_matrices]}
        if any(np.any(s != 0) for s in self.v_shifts):
            d["v_shifts"] = [s.tolist() for s in self.v_shifts]
        return d


class MatrixField:
    """A (rows x cols)-matrix-valued smooth map, stored row-major."""

    def __init__(self, rows, cols, entries):
        self.rows, self.cols = int(rows), int(cols)
        if entries.coarity != self.rows * self.cols:
            raise ValueError("matrix field needs rows*cols components")
        self.entries = entries

    @property
    def arity(self):
        return self.entries.arity

    @classmethod
    def constant(cls, matrix, arity):
        M = np.array(matrix, dtype=object)
        if M.size == 0:
            rows = len(matrix)
            cols = len(matrix[0]) if rows and hasattr(matrix[0], "__len__") else 0
            return cls(rows, cols, SmoothMap(arity, []))
        rows, cols = M.shape
        return cls(rows, cols, SmoothMap(arity, [const(v) for v in M.ravel()]))

    @classmethod
    def from_strings(cls, rows_text, arity, rows=None, cols=None):
        from .smoothmap import parse_expr
        if rows_text and isinstance(rows_text[0], list):
            r = len(rows_text)
            c = len(rows_text[0]) if r else 0
            flat = [t for row in rows_text for t in row]
        else:
            r, c, flat = rows or 0, cols or 0, []
        if rows is not None:
            r = rows
        if cols is not None:
            c = cols
        return cls(r, c, SmoothMap(arity, [parse_expr(t, arity) for t in flat]))

    def value_array(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if self.rows * self.cols == 0:
            return np.zeros((X.shape[0], self.rows, self.cols))
        return self.entries.eval_array(X).reshape(X.shape[0], self.rows, self.cols)

    def strings(self):
        s = self.entries.strings()
        return [s[i * self.cols:(i + 1) * self.cols] for i in range(self.rows)]

    def compose(self, g):
        return MatrixField(self.rows, self.cols, compose(self.entries, g))


class KuranishiChart:
    """(V, E, Gamma, s) with V a region, E = R^rank, psi realized by the zero quotient."""

    def __init__(self, name, region, rank, group, section, base_point=None, orientation=(1, 1)):
        self.name = str(name)
        self.region = region
        self.rank = int(rank)
        self.group = group
        self.section = section
        self.base_point = None if base_point is None else tuple(base_point)
        self.orientation = tuple(int(v) for v in orientation)
        if section.arity != region.dim:
            raise ValueError("section of chart %s has arity %d but V has dimension %d"
                             % (name, section.arity, region.dim))
        if section.coarity != self.rank:
            raise ValueError("section of chart %s has %d components, rank is %d"
                             % (name, section.coarity, self.rank))

    def __repr__(self):
        return "KuranishiChart(%s, dim=%d, rank=%d, |G|=%d)" % (self.name, self.dim, self.rank, self.group.order)

    @property
    def dim(self):
        return self.region.dim

    @property
    def vdim(self):
        return self.dim - self.rank

    @property
    def periods(self):
        return self.region.periods()

    def act(self, g, X):
        return self.region.wrap(self.group.act_v(g, X))

    def diff(self, A, B):
        return periodic_diff(A, B, self.periods)

    def isotropy(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)[None, :]
        return [g for g in range(self.group.order)
                if np.linalg.norm(self.diff(self.act(g, x), x)) <= tol]

    def with_region(self, region, name=None):
        return KuranishiChart(name or self.name, region, self.rank, self.group, self.section,
                              self.base_point, self.orientation)

    def zeros(self, resolution=None):
        return sample_zero_set(self.section, self.region, default_resolution(resolution))


class CoordinateChange:
    """Embedding of chart ``source`` (q) into chart ``target`` (p)."""

    def __init__(self, source, target, domain, phi, phi_hat, group_hom):
        self.source = str(source)
        self.target = str(target)
        self.domain = domain
        self.phi = phi
        self.phi_hat = phi_hat
        self.group_hom = tuple(int(g) for g in group_hom)
        if phi.arity != domain.dim:
            raise ValueError("phi arity differs from the domain dimension")
        if phi_hat.arity != domain.dim:
            raise ValueError("phi_hat arity differs from the domain dimension")

    def __repr__(self):
        return "CoordinateChange(%s -> %s)" % (self.source, self.target)

    def with_domain(self, domain):
        return CoordinateChange(self.source, self.target, domain, self.phi, self.phi_hat, self.group_hom)


def identity_change(chart):
    return CoordinateChange(chart.name, chart.name, chart.region, identity_map(chart.dim),
                            MatrixField.constant(np.eye(chart.rank), chart.dim)
                            if chart.rank else MatrixField(0, 0, SmoothMap(chart.dim, [])),
                            range(chart.group.order))


class KuranishiStructure:
    def __init__(self, charts, changes, virtual_dimension):
        self.charts = {}
        for c in charts:
            if c.name in self.charts:
                raise ValueError("duplicate chart name %s" % c.name)
            self.charts[c.name] = c
        self.changes = {}
        for cc in changes:
            for nm in (cc.source, cc.target):
                if nm not in self.charts:
                    raise ValueError("coordinate change refers to unknown chart %s" % nm)
            self.changes[(cc.target, cc.source)] = cc
        self.virtual_dimension = int(virtual_dimension)

    def chart(self, name):
        return self.charts[name]

    def change(self, p, q):
        return self.changes[(p, q)]

    def names(self):
        return list(self.charts)

    def triples(self):
        """(p, q, r) with changes p<-q, q<-r and p<-r present."""
        out = []
        for (p, q) in self.changes:
            for (q2, r) in self.changes:
                if q2 == q and r != q and p != q and (p, r) in self.changes:
                    out.append((p, q, r))
        return sorted(out)

    def zero_diagram(self):
        """Gluing diagram of the charts; X is its quotient on the zero sets."""
        from .quotient import diagram_from_structure
        return diagram_from_structure(self)


# ---------------------------------------------------------------------------
# validators


def _grid(region, resolution):
    return sample_grid(region, default_resolution(resolution))


def validate_group(group, dim=None, rank=None):
    group.check_table()
    group.check_orthogonal()
    if dim is not None and any(m.shape != (dim, dim) for m in group.v_matrices):
        raise ValueError("V-matrices have the wrong size for dimension %d" % dim)
    if rank is not None and any(m.shape != (rank, rank) for m in group.e_matrices):
        raise ValueError("E-matrices have the wrong size for rank %d" % rank)


def validate_chart(chart, resolution=None, virtual_dimension=None):
    """Report on the invariants of one chart; malformed groups raise."""
    validate_group(chart.group, chart.dim, chart.rank)
    rep = Report("chart %s" % chart.name)
    G = chart.group
    X = _grid(chart.region, resolution)
    rep.meta["grid_points"] = int(len(X))
    rep.meta["resolution"] = default_resolution(resolution)
    # representation property
    worst = 0.0
    for a, b in itertools.product(range(G.order), repeat=2):
        ab = G.mul(a, b)
        worst = max(worst, float(np.max(np.abs(G.v_matrices[a] @ G.v_matrices[b] - G.v_matrices[ab]), initial=0)))
        worst = max(worst, float(np.max(np.abs(G.e_matrices[a] @ G.e_matrices[b] - G.e_matrices[ab]), initial=0)))
        if len(X):
            lhs = chart.act(a, chart.act(b, X[:1]))
            rhs = chart.act(ab, X[:1])
            worst = max(worst, float(np.max(np.abs(chart.diff(lhs, rhs)), initial=0)))
    rep.add("representation", worst <= EQUIV_TOL, worst)
    # effectiveness
    e = G.identity
    eff_ok, eff_w = True, None
    for g in range(G.order):
        if g == e:
            continue
        moved = np.max(np.abs(chart.diff(chart.act(g, X), X)), initial=0.0) if len(X) else 0.0
        if moved <= 1e-9:
            eff_ok, eff_w = False, g
    rep.add("effective", eff_ok, witness=eff_w)
    # V invariant under the group
    inv_ok, inv_w = True, None
    for g in range(G.order):
        Y = chart.act(g, X)
        bad = ~chart.region.mask(Y, tol=1e-9)
        if bad.any():
            inv_ok, inv_w = False, X[np.argmax(bad)].tolist()
            break
    rep.add("region invariant", inv_ok, witness=inv_w)
    # equivariance of s
    worst, wit = 0.0, None
    if chart.rank and len(X):
        S = chart.section.eval_array(X)
        for g in range(G.order):
            lhs = chart.section.eval_array(chart.act(g, X))
            rhs = G.act_e(g, S)
            r = np.max(np.abs(lhs - rhs), axis=1)
            i = int(np.argmax(r))
            if r[i] > worst:
                worst, wit = float(r[i]), X[i].tolist()
    rep.add("equivariance", worst <= EQUIV_TOL, worst, wit)
    if virtual_dimension is not None:
        rep.add("virtual dimension", chart.vdim == virtual_dimension,
                detail="dim V - rank E = %d, expected %d" % (chart.vdim, virtual_dimension))
    if chart.base_point is not None:
        bp = np.array(chart.base_point, dtype=float)
        inside = chart.region.contains(bp, tol=1e-12)
        val = float(np.max(np.abs(chart.section.eval_array(bp)), initial=0.0)) if chart.rank else 0.0
        rep.add("base point", inside and val <= EQUIV_TOL, val, chart.base_point)
    orient_ok = all(np.linalg.det(G.v_matrices[g]) * (np.linalg.det(G.e_matrices[g]) if chart.rank else 1.0) > 0
                    for g in range(G.order))
    rep.add("orientation preserved", orient_ok and all(abs(o) == 1 for o in chart.orientation))
    return rep


def _stabilizers(chart, X, tol=1e-9):
    out = []
    for x in X:
        out.append(frozenset(chart.isotropy(x, tol)))
    return out


def validate_coordinate_change(cc, charts, resolution=None, pair_budget=400):
    """Items (1)-(6) of a coordinate change checked on grids of the domain."""
    q = charts[cc.source]
    p = charts[cc.target]
    rep = Report("change %s -> %s" % (cc.source, cc.target))
    if cc.domain.dim != q.dim:
        raise ValueError("domain region has dimension %d, source chart has %d" % (cc.domain.dim, q.dim))
    if any(lo < ql for lo, ql in zip(cc.domain.lower, q.region.lower)) or \
            any(hi > qh for hi, qh in zip(cc.domain.upper, q.region.upper)):
        if not all(a in q.region.periodic for a in range(q.dim)):
            raise ValueError("domain region of %s -> %s is not contained in the source chart"
                             % (cc.source, cc.target))
    X = _grid(cc.domain, resolution)
    if len(X) and not q.region.mask(X, tol=1e-9).all():
        raise ValueError("domain region of %s -> %s is not contained in the source chart"
                         % (cc.source, cc.target))
    rep.meta["grid_points"] = int(len(X))
    if cc.phi.coarity != p.dim:
        raise ValueError("phi has %d components, target chart has dimension %d" % (cc.phi.coarity, p.dim))
    if (cc.phi_hat.rows, cc.phi_hat.cols) != (p.rank, q.rank):
        raise ValueError("phi_hat has shape %sx%s, expected %dx%d"
                         % (cc.phi_hat.rows, cc.phi_hat.cols, p.rank, q.rank))
    Gq, Gp, h = q.group, p.group, cc.group_hom
    # (1) injective homomorphism
    hom_ok = len(h) == Gq.order and all(0 <= v < Gp.order for v in h)
    if hom_ok:
        hom_ok = all(h[Gq.mul(a, b)] == Gp.mul(h[a], h[b]) for a in range(Gq.order) for b in range(Gq.order))
        hom_ok = hom_ok and len(set(h)) == len(h)
    rep.add("(1) injective homomorphism", hom_ok, witness=None if hom_ok else list(h))
    if not hom_ok:
        return rep
    # (2) invariance of the domain
    inv_ok, wit = True, None
    for g in range(Gq.order):
        bad = ~cc.domain.mask(q.act(g, X), tol=1e-9)
        if bad.any():
            inv_ok, wit = False, X[np.argmax(bad)].tolist()
            break
    rep.add("(2) domain invariant", inv_ok, witness=wit)
    # (3) equivariant embedding into V_p
    Y = p.region.wrap(cc.phi.eval_array(X)) if len(X) else np.zeros((0, p.dim))
    into = p.region.mask(Y, tol=1e-9) if len(X) else np.ones(0, bool)
    worst = 0.0
    wit = None
    for g in range(Gq.order):
        lhs = p.region.wrap(cc.phi.eval_array(q.act(g, X))) if len(X) else Y
        rhs = p.act(h[g], Y)
        r = np.max(np.abs(p.diff(lhs, rhs)), axis=1, initial=0) if len(X) else np.zeros(0)
        if len(r) and r.max() > worst:
            worst, wit = float(r.max()), X[int(np.argmax(r))].tolist()
    J = cc.phi.jacobian_array(X) if len(X) else np.zeros((0, p.dim, q.dim))
    smin = np.linalg.svd(J, compute_uv=False)[:, -1] if len(X) and q.dim else np.full(len(X), np.inf)
    imm_ok = bool(np.all(smin > 1e-10))
    # injectivity modulo the groups on a pair sample
    inj_ok, inj_w = True, None
    idx = np.linspace(0, len(X) - 1, min(len(X), int(np.sqrt(pair_budget) * 3))).astype(int) if len(X) else []
    sub = X[idx] if len(X) else X
    subY = Y[idx] if len(X) else Y
    for i in range(len(sub)):
        for g in range(Gp.order):
            gy = p.act(g, subY[i:i + 1])
            close = np.linalg.norm(p.diff(subY, gy), axis=1) < 1e-9
            for j in np.flatnonzero(close):
                if j == i:
                    continue
                # x_j must be a Gamma_q translate of x_i
                if not any(np.linalg.norm(q.diff(q.act(gq, sub[i:i + 1]), sub[j:j + 1])) < 1e-9
                           for gq in range(Gq.order)):
                    inj_ok, inj_w = False, [sub[i].tolist(), sub[j].tolist()]
                    break
            if not inj_ok:
                break
        if not inj_ok:
            break
    emb_ok = bool(into.all()) and worst <= EQUIV_TOL and imm_ok and inj_ok
    rep.add("(3) equivariant embedding", emb_ok, worst,
            wit if worst > EQUIV_TOL else (inj_w if not inj_ok else (
                X[np.argmin(into)].tolist() if len(X) and not into.all() else None)),
            "" if emb_ok else "into=%s immersion=%s injective=%s" % (bool(into.all()), imm_ok, inj_ok))
    # (4) bundle map intertwines sections and actions
    worst4, wit4 = 0.0, None
    if len(X) and p.rank:
        PH = cc.phi_hat.value_array(X)
        Sq = q.section.eval_array(X) if q.rank else np.zeros((len(X), 0))
        lhs = np.einsum("nij,nj->ni", PH, Sq)
        rhs = p.section.eval_array(Y)
        r = np.max(np.abs(lhs - rhs), axis=1)
        worst4, wit4 = float(r.max()), X[int(np.argmax(r))].tolist()
        for g in range(Gq.order):
            PHg = cc.phi_hat.value_array(q.act(g, X))
            a = PHg @ Gq.e_matrices[g] if q.rank else PHg
            b = np.einsum("ij,njk->nik", Gp.e_matrices[h[g]], PH)
            rr = float(np.max(np.abs(a - b), initial=0))
            if rr > worst4:
                worst4, wit4 = rr, X[0].tolist()
        if q.rank:
            ranks = np.linalg.matrix_rank(PH, tol=1e-10)
            if np.any(ranks < q.rank):
                worst4, wit4 = max(worst4, 1.0), X[int(np.argmin(ranks))].tolist()
    rep.add("(4) bundle embedding intertwines sections", worst4 <= EQUIV_TOL, worst4,
            wit4 if worst4 > EQUIV_TOL else None)
    # (5) footprints: identification is by construction of X
    rep.add("(5) footprint compatibility", True, detail="X is the quotient by these identifications")
    # (6) isotropy isomorphism
    iso_ok, iso_w = True, None
    for x, y in zip(X, Y):
        sx = frozenset(q.isotropy(x))
        sy = frozenset(p.isotropy(y))
        if frozenset(h[g] for g in sx) != sy:
            iso_ok, iso_w = False, x.tolist()
            break
    rep.add("(6) isotropy isomorphism", iso_ok, witness=iso_w)
    return rep


def grid_clusters(points, region, resolution):
    """Connected components of the grid graph on sampled points."""
    n = len(points)
    if n == 0:
        return []
    axes = grid_axes(region, default_resolution(resolution))
    spacing = max([float(ax[1] - ax[0]) for ax in axes if len(ax) > 1] or [1.0])
    tree = cKDTree(points)
    pairs = np.array(sorted(tree.query_pairs(spacing * 1.01)), dtype=int).reshape(-1, 2)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    k, labels = connected_components(graph, directed=False)
    return [np.flatnonzero(labels == c) for c in range(k)]


def cocycle_domain(structure, p, q, r):
    """The region phi_qr^-1(V_pq) cap V_qr cap V_pr in r-coordinates."""
    c_qr = structure.change(q, r)
    c_pq = structure.change(p, q)
    c_pr = structure.change(p, r)
    dom = c_qr.domain.intersect(c_pr.domain)
    pulled = c_pq.domain.pullback(c_qr.phi, dom.lower, dom.upper, dom.periodic)
    return dom.intersect(pulled)


def check_cocycle(structure, triple, resolution=None):
    """Find gamma in Gamma_p per grid cluster realizing the cocycle identity."""
    p, q, r = triple
    P = structure.chart(p)
    c_qr, c_pq, c_pr = structure.change(q, r), structure.change(p, q), structure.change(p, r)
    R = structure.chart(r)
    dom = cocycle_domain(structure, p, q, r)
    X = _grid(dom, resolution)
    clusters = grid_clusters(X, dom, resolution)
    Gp = P.group
    Gr = R.group
    result = []
    for cl in clusters:
        pts = X[cl]
        A = P.region.wrap(c_pq.phi.eval_array(structure.chart(q).region.wrap(c_qr.phi.eval_array(pts))))
        B = P.region.wrap(c_pr.phi.eval_array(pts))
        Mqr = c_qr.phi_hat.value_array(pts)
        Mpq = c_pq.phi_hat.value_array(structure.chart(q).region.wrap(c_qr.phi.eval_array(pts)))
        Mpr = c_pr.phi_hat.value_array(pts)
        MM = np.einsum("nij,njk->nik", Mpq, Mqr)
        best, found = np.inf, None
        for g in range(Gp.order):
            gi = Gp.inverse(g)
            hom_ok = all(c_pq.group_hom[c_qr.group_hom[a]] ==
                         Gp.mul(Gp.mul(g, c_pr.group_hom[a]), gi) for a in range(Gr.order))
            if not hom_ok:
                continue
            res_v = float(np.max(np.abs(P.diff(A, P.act(g, B))), initial=0))
            res_e = float(np.max(np.abs(MM - np.einsum("ij,njk->nik", Gp.e_matrices[g], Mpr)), initial=0))
            res = max(res_v, res_e)
            if res < best:
                best = res
            if res <= COCYCLE_TOL:
                found = g
                break
        if found is None:
            raise CocycleError("no group element satisfies the cocycle identity on a cluster of %s"
                               % (triple,), residual=best, witness=pts[0].tolist())
        result.append({"cluster_size": int(len(cl)), "gamma": int(found),
                       "witness": pts[0].tolist()})
    return result


def _orth_complement(A, tol=1e-10):
    """Orthonormal basis (columns) of the complement of the column span of A."""
    n = A.shape[0]
    if A.shape[1] == 0:
        return np.eye(n)
    u, s, _ = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > tol))
    return u[:, rank:]


def check_tangent_condition(structure, pair, resolution=None):
    """d_fiber s_p on the normal bundle must be an isomorphism onto E_p/E_q."""
    p, q = pair
    P, Q = structure.chart(p), structure.chart(q)
    cc = structure.change(p, q)
    if P.dim - Q.dim != P.rank - Q.rank:
        raise ValueError("dimension mismatch: normal rank %d vs obstruction quotient rank %d"
                         % (P.dim - Q.dim, P.rank - Q.rank))
    return tangent_report(P, Q, cc, resolution)


def tangent_report(P, Q, cc, resolution=None):
    rep = Report("tangent condition %s -> %s" % (Q.name, P.name))
    Z = sample_zero_set(Q.section, cc.domain, default_resolution(resolution))
    rep.meta["zeros"] = int(len(Z))
    normal_rank = P.dim - Q.dim
    worst, wit = np.inf, None
    if normal_rank == 0:
        rep.add("normal isomorphism", True, detail="normal rank 0")
        return rep
    for z in Z:
        dphi = cc.phi.jacobian_array(z)[0]
        N = _orth_complement(dphi)
        y = cc.phi.eval_array(z)[0]
        ds = P.section.jacobian_array(y)[0]
        ph = cc.phi_hat.value_array(z)[0]
        C = _orth_complement(ph)
        D = C.T @ ds @ N
        if D.shape[0] != D.shape[1]:
            rep.add("normal isomorphism", False, detail="non-square fiber derivative")
            return rep
        d = abs(np.linalg.det(D))
        if d < worst:
            worst, wit = d, z.tolist()
    if wit is None:
        rep.add("normal isomorphism", True, detail="no zeros in the overlap")
    else:
        rep.add("normal isomorphism", worst > DET_TOL, worst, wit)
    return rep


def validate_orbifold_embedding(maps, source_charts, target_charts, resolution=None):
    """Check an orbifold embedding given chart-wise.

    ``maps`` is a list of ``(source index, target index, SmoothMap, group hom)``.
    """
    rep = Report("orbifold embedding")
    worst_eq, w_eq = 0.0, None
    imm_ok, w_imm = True, None
    iso_ok, w_iso = True, None
    inj_ok, w_inj = True, None
    for si, ti, F, hom in maps:
        S, T = source_charts[si], target_charts[ti]
        X = _grid(S.region, resolution)
        Y = T.region.wrap(F.eval_array(X)) if S.dim else np.tile(F.eval_array(np.zeros((1, 0))), (len(X), 1))
        for g in range(S.group.order):
            if S.dim:
                lhs = T.region.wrap(F.eval_array(S.act(g, X)))
            else:
                lhs = Y
            r = float(np.max(np.abs(T.diff(lhs, T.act(hom[g], Y))), initial=0))
            if r > worst_eq:
                worst_eq, w_eq = r, X[0].tolist()
        if S.dim:
            J = F.jacobian_array(X)
            smin = np.linalg.svd(J, compute_uv=False)[:, -1]
            if np.any(smin <= 1e-10):
                imm_ok, w_imm = False, X[int(np.argmin(smin))].tolist()
        for x, y in zip(X, Y):
            sx = frozenset(hom[g] for g in S.isotropy(x))
            sy = frozenset(T.isotropy(y))
            if sx != sy:
                iso_ok, w_iso = False, {"source": x.tolist(), "target": y.tolist(),
                                        "source_isotropy": len(sx), "target_isotropy": len(sy)}
                break
        for i in range(len(X)):
            for j in range(i + 1, len(X)):
                same_t = any(np.linalg.norm(T.diff(T.act(g, Y[i:i + 1]), Y[j:j + 1])) < 1e-9
                             for g in range(T.group.order))
                same_s = any(np.linalg.norm(S.diff(S.act(g, X[i:i + 1]), X[j:j + 1])) < 1e-9
                             for g in range(S.group.order))
                if same_t and not same_s:
                    inj_ok, w_inj = False, [X[i].tolist(), X[j].tolist()]
                    break
            if not inj_ok or i > 60:
                break
    rep.add("(1) equivariant", worst_eq <= EQUIV_TOL, worst_eq, w_eq if worst_eq > EQUIV_TOL else None)
    rep.add("(2) embedding", imm_ok, witness=w_imm)
    rep.add("(4) isotropy isomorphism", iso_ok, witness=w_iso)
    rep.add("(5) injective on quotients", inj_ok, witness=w_inj)
    return rep


def validate_structure(structure, resolution=None):
    rep = Report("structure")
    vd = structure.virtual_dimension
    rep.add("constant virtual dimension", all(c.vdim == vd for c in structure.charts.values()),
            detail=", ".join("%s:%d" % (n, c.vdim) for n, c in sorted(structure.charts.items())))
    for name in sorted(structure.charts):
        rep.extend(validate_chart(structure.charts[name], resolution, vd), prefix="%s: " % name)
    for key in sorted(structure.changes):
        cc = structure.changes[key]
        rep.extend(validate_coordinate_change(cc, structure.charts, resolution),
                   prefix="%s<-%s: " % key)
        try:
            rep.extend(check_tangent_condition(structure, key, resolution), prefix="%s<-%s: " % key)
        except ValueError as err:
            rep.add("%s<-%s: normal isomorphism" % key, False, detail=str(err))
    for t in structure.triples():
        try:
            got = check_cocycle(structure, t, resolution)
            rep.add("cocycle %s" % (t,), True, detail="gammas %s" % [g["gamma"] for g in got])
        except CocycleError as err:
            rep.add("cocycle %s" % (t,), False, err.residual, err.witness)
    return rep


class StronglyContinuousMap:
    """Chart-wise maps ``f_p`` into a common R^d, compatible with the changes."""

    def __init__(self, maps):
        self.maps = dict(maps)
        dims = {m.coarity for m in self.maps.values()}
        if len(dims) > 1:
            raise ValueError("all chart maps must share a target dimension")
        self.target_dim = dims.pop() if dims else 0

    @classmethod
    def to_point(cls, structure_or_charts):
        charts = structure_or_charts.charts.values() if hasattr(structure_or_charts, "charts") else structure_or_charts
        return cls({c.name: SmoothMap(c.dim, []) for c in charts})

    def __getitem__(self, name):
        return self.maps[name]

    def validate(self, structure, resolution=None):
        rep = Report("strongly continuous map")
        for (p, q), cc in sorted(structure.changes.items()):
            if p not in self.maps or q not in self.maps:
                rep.add("%s<-%s" % (p, q), False, detail="missing chart map")
                continue
            X = _grid(cc.domain, resolution)
            if not len(X) or self.target_dim == 0:
                rep.add("%s<-%s" % (p, q), True, 0.0)
                continue
            lhs = self.maps[p].eval_array(cc.phi.eval_array(X))
            rhs = self.maps[q].eval_array(X)
            r = float(np.max(np.abs(lhs - rhs)))
            rep.add("%s<-%s" % (p, q), r <= EQUIV_TOL, r)
        return rep


def fraction_matrix(M):
    return [[Fraction(v) for v in row] for row in M]
