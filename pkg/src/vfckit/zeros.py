"""Locating zeros of smooth maps: Newton seeding, deduplication, curve tracing."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .smoothmap import sample_grid

NEWTON_TOL = 1e-12


def newton_project(F, X0, tol=NEWTON_TOL, maxit=60, max_step=None):
    """Gauss-Newton with minimum-norm steps from every row of ``X0``.

    For square systems this is Newton's method; for underdetermined ones it
    lands on the zero set near the seed.  Returns ``(X, residual_norms)``.
    """
    X = np.array(X0, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[None, :]
    if F.coarity == 0 or X.shape[0] == 0:
        return X, np.zeros(X.shape[0])
    R = F.eval_array(X)
    res = np.linalg.norm(R, axis=1)
    for _ in range(maxit):
        active = np.flatnonzero(res > tol)
        if active.size == 0:
            break
        J = F.jacobian_array(X[active])
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-13), R[active])
        if max_step is not None:
            sn = np.linalg.norm(step, axis=1)
            scale = np.minimum(1.0, max_step / np.maximum(sn, 1e-300))
            step *= scale[:, None]
        Xa = X[active] + step
        Ra = F.eval_array(Xa)
        ra = np.linalg.norm(Ra, axis=1)
        X[active] = Xa
        R[active] = Ra
        stalled = ra >= res[active] * (1 - 1e-3)
        res[active] = ra
        if stalled.all() and np.all(ra > tol):
            # no progress anywhere: give up early
            break
    return X, res


def dedupe(points, tol):
    """Greedy deduplication keeping the first representative."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts, np.zeros(0, dtype=int)
    order = np.lexsort(pts.T[::-1])
    kept, index = [], np.empty(len(pts), dtype=int)
    for i in order:
        for j, k in enumerate(kept):
            if np.linalg.norm(pts[i] - pts[k]) < tol:
                index[i] = j
                break
        else:
            index[i] = len(kept)
            kept.append(i)
    return pts[kept], index


def find_zeros(F, region, resolution, tol=NEWTON_TOL, dedup_tol=None, seeds=None):
    """Zeros of ``F`` inside ``region`` reached by Newton from grid seeds."""
    if seeds is None:
        seeds = sample_grid(region.closure(), resolution)
    if len(seeds) == 0:
        return np.zeros((0, region.dim))
    diam = float(max(float(h - l) for l, h in zip(region.lower, region.upper))) if region.dim else 1.0
    X, res = newton_project(F, seeds, tol=tol, max_step=0.5 * max(diam, 1e-9))
    ok = (res <= max(tol, 1e-10)) & region.mask(region.wrap(X))
    pts = region.wrap(X[ok])
    if dedup_tol is None:
        dedup_tol = 1e-7
    return dedupe(pts, dedup_tol)[0]


def sample_zero_set(F, region, resolution, tol=NEWTON_TOL):
    """Points of the zero set (any dimension) by projecting grid points."""
    seeds = sample_grid(region, resolution)
    if F.coarity == 0:
        return seeds
    X, res = newton_project(F, seeds, tol=tol, max_step=None)
    ok = (res <= max(tol, 1e-10)) & region.mask(region.wrap(X))
    return dedupe(region.wrap(X[ok]), 1e-9)[0]


def min_singular(J):
    """Smallest singular value relevant for surjectivity of each Jacobian."""
    J = np.asarray(J, dtype=float)
    if J.ndim == 2:
        J = J[None]
    k, n = J.shape[1], J.shape[2]
    if k == 0:
        return np.full(J.shape[0], np.inf)
    if k > n:
        return np.zeros(J.shape[0])
    s = np.linalg.svd(J, compute_uv=False)
    return s[:, -1]


@dataclass
class Polyline:
    points: np.ndarray
    closed: bool
    end_tags: tuple = ("frontier", "frontier")
    extra: dict = field(default_factory=dict)

    def length(self):
        p = self.points
        if self.closed:
            p = np.vstack([p, p[:1]])
        return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def _tangent(J, orient=None):
    # null vector of a (n-1) x n Jacobian, oriented so det [t; J] > 0
    _, _, vt = np.linalg.svd(J)
    t = vt[-1]
    d = np.linalg.det(np.vstack([t, J]))
    if d < 0:
        t = -t
    return t


def trace_curves(F, region, resolution, h=None, tol=1e-11, max_steps=20000):
    """Trace the one-dimensional zero set of ``F: R^n -> R^(n-1)``.

    Returns polylines oriented by ``det [t; dF] > 0``; each is closed or ends
    on the frontier of ``region``.
    """
    n = region.dim
    if F.coarity != n - 1:
        raise ValueError("curve tracing needs n-1 equations in n unknowns")
    seeds = find_zeros(F, region, resolution, tol=tol, dedup_tol=1e-6)
    diam = max(float(u - l) for l, u in zip(region.lower, region.upper))
    if h is None:
        h = diam / max(4 * resolution, 8)
    curves = []
    covered = np.zeros((0, n))

    def correct(y):
        Y, r = newton_project(F, y[None, :], tol=tol, maxit=30)
        return Y[0], r[0]

    def inside(y):
        return region.contains(y)

    def march(start, sign):
        pts = [start]
        y = start
        closed = False
        tag = "frontier"
        for step in range(max_steps):
            J = F.jacobian_array(y)[0]
            t = sign * _tangent(J)
            y_new, r = correct(y + h * t)
            if r > 1e-8 or np.linalg.norm(y_new - y) > 3 * h:
                # shrink the step once before giving up
                y_new, r = correct(y + 0.25 * h * t)
                if r > 1e-8:
                    tag = "stalled"
                    break
            if not inside(y_new):
                # bisect for the frontier crossing along the chord
                a, b = y, y_new
                for _ in range(60):
                    mid, _r = correct(0.5 * (a + b))
                    if inside(mid):
                        a = mid
                    else:
                        b = mid
                    if np.linalg.norm(b - a) < 1e-10:
                        break
                pts.append(a)
                tag = "frontier"
                break
            pts.append(y_new)
            if step > 3 and np.linalg.norm(y_new - start) < 0.6 * h:
                closed = True
                pts.pop()
                break
            y = y_new
        return np.array(pts), closed, tag

    for s in seeds:
        if len(covered) and np.min(np.linalg.norm(covered - s, axis=1)) < 2 * h:
            continue
        fwd, closed, tag_f = march(s, +1.0)
        if closed:
            pl = Polyline(fwd, True, ("closed", "closed"))
        else:
            bwd, _, tag_b = march(s, -1.0)
            pts = np.vstack([bwd[::-1], fwd[1:]])
            pl = Polyline(pts, False, (tag_b, tag_f))
        curves.append(pl)
        covered = np.vstack([covered, pl.points])
    return curves
