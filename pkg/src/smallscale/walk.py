"""Sticky Gaussian walk in the intersection of the cube and a slab polytope.

The walk starts at ``x0`` and takes Gaussian steps projected onto the
orthogonal complement of every face it is currently stuck to. Faces are the
cube faces ``|x_i| = 1`` and the row walls ``lower_j <= <x - x0, a_j> <= upper_j``.
Steps are truncated exactly at the first face they would cross, so the
iterate never leaves the polytope; the truncated remainder of the step is
re-projected and continued.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

SNAP = 1e-12


class DenseRows:
    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("row matrix must be 2-d")

    def __len__(self):
        return self.A.shape[0]

    def apply(self, u):
        return self.A @ u

    def row(self, j):
        return self.A[j]


class SineGridRows:
    """Rows ``k -> sign_g * sin(k x_g)`` for grid points ``x_g = 2 pi g / N``.

    Columns are indexed by ``freqs``; ``points`` selects a subset of the grid
    (default: all of it). ``apply`` costs one FFT.
    """

    def __init__(self, freqs, N, points=None, signs=None):
        self.freqs = np.asarray(freqs, dtype=np.int64)
        self.N = int(N)
        if self.freqs.size and self.freqs.max() >= self.N:
            raise ValueError("grid too coarse for the highest frequency")
        self.points = np.arange(self.N) if points is None else np.asarray(points, dtype=np.int64)
        self.signs = np.ones(self.points.size) if signs is None else np.asarray(signs, dtype=float)

    def __len__(self):
        return self.points.size

    def apply(self, u):
        c = np.zeros(self.N, dtype=complex)
        c[self.freqs] = u
        return self.signs * (np.fft.ifft(c).imag[self.points] * self.N)

    def row(self, j):
        return self.signs[j] * np.sin(self.freqs * (2.0 * np.pi * self.points[j] / self.N))


class StackedRows:
    def __init__(self, *parts):
        self.parts = [p for p in parts if len(p)]
        self.offsets = np.cumsum([0] + [len(p) for p in self.parts])

    def __len__(self):
        return int(self.offsets[-1])

    def apply(self, u):
        if not self.parts:
            return np.zeros(0)
        return np.concatenate([p.apply(u) for p in self.parts])

    def row(self, j):
        i = int(np.searchsorted(self.offsets, j, side="right") - 1)
        return self.parts[i].row(j - self.offsets[i])


@dataclass
class WalkResult:
    x: np.ndarray
    frozen: np.ndarray
    stuck: np.ndarray
    time: float
    steps: int
    events: int = 0
    history: list = field(default_factory=list)


class _StuckBasis:
    """Orthonormal basis of the stuck rows restricted to the free coordinates.

    Rows are added by Gram-Schmidt; freezing a coordinate deletes a row of Q and
    restores orthonormality with an exact rank-one correction. A pivoted QR of
    the cached raw rows is redone every ``refresh`` updates to bound drift.
    """

    def __init__(self, rows, free, refresh=64):
        self.rows = rows
        self.free_idx = np.flatnonzero(free)
        self.raw = {}
        self.Q = np.zeros((self.free_idx.size, 0))
        self.refresh = refresh
        self.updates = 0

    def _raw(self, j):
        r = self.raw.get(j)
        if r is None:
            r = np.asarray(self.rows.row(j), dtype=float)
            self.raw[j] = r
        return r

    def rebuild(self):
        self.updates = 0
        if not self.raw or self.free_idx.size == 0:
            self.Q = np.zeros((self.free_idx.size, 0))
            return
        B = np.stack([r[self.free_idx] for r in self.raw.values()], axis=1)
        Q, R, _ = scipy.linalg.qr(B, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        keep = d > 1e-10 * max(1.0, d[0] if d.size else 1.0)
        self.Q = Q[:, keep]

    def _tick(self):
        self.updates += 1
        if self.updates >= self.refresh:
            self.rebuild()

    def add_rows(self, js):
        for j in js:
            r = self._raw(int(j))[self.free_idx]
            norm0 = np.linalg.norm(r)
            if norm0 == 0.0:
                continue
            for _ in range(2):
                if self.Q.shape[1]:
                    r = r - self.Q @ (self.Q.T @ r)
            nr = np.linalg.norm(r)
            if nr > 1e-9 * norm0:
                self.Q = np.column_stack([self.Q, r / nr])
        self._tick()

    def freeze(self, coords):
        for i in coords:
            pos = int(np.searchsorted(self.free_idx, i))
            if pos >= self.free_idx.size or self.free_idx[pos] != i:
                continue
            q = self.Q[pos].copy()
            self.free_idx = np.delete(self.free_idx, pos)
            self.Q = np.delete(self.Q, pos, axis=0)
            qq = float(q @ q)
            if self.Q.shape[1] == 0 or qq == 0.0:
                continue
            if 1.0 - qq < 1e-8:
                self.rebuild()
                continue
            # (I - q q^T)^(-1/2) = I + (1/sqrt(1 - |q|^2) - 1) q q^T / |q|^2
            c = (1.0 / math.sqrt(1.0 - qq) - 1.0) / qq
            self.Q = self.Q + c * np.outer(self.Q @ q, q)
        self._tick()

    @property
    def rank(self):
        return self.Q.shape[1]

    def project(self, g):
        if self.Q.shape[1]:
            g = g - self.Q @ (self.Q.T @ g)
        return g


def sticky_walk(rows, lower, upper, x0, rng, step_size, max_time,
                stick_tol=0.0, max_steps=None):
    """Run the walk and return the final point with its frozen/stuck bookkeeping.

    ``lower``/``upper`` bound ``<x - x0, a_j>``; use ``-inf``/``inf`` for open sides.
    A row whose offset starts outside its walls is stuck from the start, so it is
    held at its initial offset.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    x = x0.copy()
    frozen = np.abs(x) >= 1.0 - SNAP
    x[frozen] = np.sign(x[frozen])
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m = len(rows)
    v = rows.apply(x - x0) if m else np.zeros(0)
    stuck = (v <= lower + stick_tol) | (v >= upper - stick_tol)
    basis = _StuckBasis(rows, ~frozen)
    basis.add_rows(np.flatnonzero(stuck))

    time = 0.0
    steps = 0
    events = 0
    limit = np.inf if max_steps is None else max_steps
    while time < max_time and steps < limit:
        free = ~frozen
        nfree = int(free.sum())
        if nfree == 0 or nfree <= basis.rank:
            break
        g = basis.project(rng.standard_normal(nfree))
        u = np.zeros(n)
        u[free] = step_size * g
        tau = 1.0
        while tau > 0.0:
            r = rows.apply(u) if m else np.zeros(0)
            idx = np.flatnonzero(u)
            t_cube = np.full(n, np.inf)
            t_cube[idx] = (np.sign(u[idx]) - x[idx]) / u[idx]
            t_row = np.full(m, np.inf)
            live = ~stuck
            pos = live & (r > 0)
            neg = live & (r < 0)
            t_row[pos] = (upper[pos] - v[pos]) / r[pos]
            t_row[neg] = (lower[neg] - v[neg]) / r[neg]
            tc = t_cube.min() if n else np.inf
            tr = t_row.min() if m else np.inf
            t_hit = max(0.0, min(tc, tr))
            if t_hit >= tau:
                x += tau * u
                v += tau * r
                break
            x += t_hit * u
            v += t_hit * r
            tau -= t_hit
            events += 1
            new_frozen = (t_cube <= t_hit * (1 + 1e-12) + 1e-300) & ~frozen
            frozen |= new_frozen
            x[new_frozen] = np.sign(x[new_frozen])
            new_stuck = (t_row <= t_hit * (1 + 1e-12) + 1e-300) & ~stuck
            stuck |= new_stuck
            basis.freeze(np.flatnonzero(new_frozen))
            basis.add_rows(np.flatnonzero(new_stuck))
            free = ~frozen
            if not free.any() or free.sum() <= basis.rank:
                break
            uf = basis.project(u[free])
            u = np.zeros(n)
            u[free] = uf
            if not np.any(uf):
                break
        # resync offsets and apply the proximity rule
        if m:
            v = rows.apply(x - x0)
            near = ~stuck & ((v <= lower + stick_tol) | (v >= upper - stick_tol))
            if near.any():
                stuck |= near
                basis.add_rows(np.flatnonzero(near))
        # float cleanup on the cube
        close = ~frozen & (np.abs(x) >= 1.0 - SNAP)
        if close.any():
            frozen |= close
            x[close] = np.sign(x[close])
            basis.freeze(np.flatnonzero(close))
        np.clip(x, -1.0, 1.0, out=x)
        time += step_size ** 2
        steps += 1
    return WalkResult(x=x, frozen=frozen, stuck=stuck, time=time, steps=steps, events=events)
