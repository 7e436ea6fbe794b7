"""Bounded-variable dual simplex for the box relaxation of an :class:`IlpInstance`.

Internally the LP is written as

    minimize  c^T y   s.t.  [A, -coupling, -I] y = rhs,   lo <= y <= hi

with y = (z, lambda, s). The all-slack basis is dual feasible once every
structural variable rests at the bound matching the sign of its cost, so no
phase one is needed. Branching only tightens bounds, which keeps a parent
basis dual feasible for its children.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .ilp import IlpInstance


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class BasisState:
    basis: np.ndarray  # column index basic in each row
    at_upper: np.ndarray  # bool per column; meaningful only for nonbasic columns


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    z: np.ndarray | None
    lam: float | None
    value: float
    basis: BasisState | None
    iterations: int
    # reduced costs of the structural z variables in maximisation sign convention
    reduced_costs: np.ndarray | None = None


def lambda_bounds(inst: IlpInstance, margin: float = 1.0) -> tuple[float, float]:
    """Finite bounds on lambda that never cut an optimal (z, lambda) pair.

    For any z in the box, max feasible lambda = min over positively coupled rows
    of (A_k z - rhs_k) / coupling_k, which lies between the two values below.
    """
    cp = inst.coupling
    pos = cp > 0
    reach = inst.amplitude * np.abs(inst.constraint_matrix[pos]).sum(axis=1)
    hi = float(np.min((reach - inst.rhs[pos]) / cp[pos]))
    lo = float(np.min((-reach - inst.rhs[pos]) / cp[pos]))
    return lo - margin * (1.0 + abs(lo)), hi


class DualSimplex:
    """Reusable solver for one instance; node bounds vary per call."""

    def __init__(self, inst: IlpInstance, feas_tol: float = 1e-9, pivot_tol: float = 1e-11):
        self.inst = inst
        n, m = inst.n_vars, inst.n_rows
        self.n_struct = n + (1 if inst.has_continuous else 0)
        cols = [inst.constraint_matrix]
        cost = [-inst.objective]
        if inst.has_continuous:
            cols.append(-inst.coupling[:, None])
            cost.append(np.array([-1.0]))
            self.lam_lo, self.lam_hi = lambda_bounds(inst)
        cols.append(-np.eye(m))
        cost.append(np.zeros(m))
        self.a_full = np.hstack(cols)
        self.cost = np.concatenate(cost)
        self.m = m
        self.feas_tol = feas_tol
        self.pivot_tol = pivot_tol

    def full_bounds(self, z_lo: np.ndarray, z_hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = [z_lo]
        hi = [z_hi]
        if self.inst.has_continuous:
            lo.append([self.lam_lo])
            hi.append([self.lam_hi])
        lo.append(np.zeros(self.m))
        hi.append(np.full(self.m, np.inf))
        return np.concatenate(lo), np.concatenate(hi)

    def slack_basis(self) -> BasisState:
        ncol = self.a_full.shape[1]
        return BasisState(
            basis=np.arange(self.n_struct, ncol),
            at_upper=np.concatenate([self.cost[: self.n_struct] < 0, np.zeros(self.m, dtype=bool)]),
        )

    def solve(
        self,
        z_lo: np.ndarray,
        z_hi: np.ndarray,
        warm: BasisState | None = None,
        max_iter: int | None = None,
    ) -> LpResult:
        result = self._run(z_lo, z_hi, warm or self.slack_basis(), max_iter)
        if result.status is LpStatus.ITERATION_LIMIT and warm is not None:
            result = self._run(z_lo, z_hi, self.slack_basis(), max_iter)
        return result

    def _run(self, z_lo, z_hi, start: BasisState, max_iter: int | None) -> LpResult:
        a = self.a_full
        c = self.cost
        m = self.m
        ncol = a.shape[1]
        lo, hi = self.full_bounds(np.asarray(z_lo, float), np.asarray(z_hi, float))
        basis = start.basis.copy()
        at_upper = start.at_upper.copy()
        fixed = lo == hi
        scale = 1.0 + np.abs(self.inst.rhs).max(initial=0.0) + self.inst.amplitude
        tol = self.feas_tol * scale
        limit = max_iter or 50 * (m + ncol)

        is_basic = np.zeros(ncol, dtype=bool)
        for it in range(limit + 1):
            is_basic[:] = False
            is_basic[basis] = True
            x = np.where(at_upper, hi, lo)
            x[is_basic] = 0.0
            b_inv = np.linalg.inv(a[:, basis])
            x_b = b_inv @ (self.inst.rhs - a @ x)
            below = lo[basis] - x_b
            above = x_b - hi[basis]
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if m else 0
            if m == 0 or viol[r] <= tol:
                x[basis] = x_b
                d = c - (c[basis] @ b_inv) @ a
                d[basis] = 0.0
                return self._finish(LpStatus.OPTIMAL, x, BasisState(basis, at_upper), it, d)
            if it == limit:
                break
            alpha = b_inv[r] @ a
            d = c - (c[basis] @ b_inv) @ a
            eligible = ~is_basic & ~fixed
            if below[r] > above[r]:
                cand = eligible & ((~at_upper & (alpha < -self.pivot_tol)) | (at_upper & (alpha > self.pivot_tol)))
                leave_upper = False
            else:
                cand = eligible & ((~at_upper & (alpha > self.pivot_tol)) | (at_upper & (alpha < -self.pivot_tol)))
                leave_upper = True
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return LpResult(LpStatus.INFEASIBLE, None, None, -np.inf, None, it)
            # dual-feasible sign of d_j is >= 0 at lower and <= 0 at upper
            dj = np.where(at_upper[idx], -d[idx], d[idx])
            ratios = np.maximum(dj, 0.0) / np.abs(alpha[idx])
            best = ratios.min()
            ties = idx[ratios <= best + 1e-12 * (1.0 + best)]
            q = int(ties[np.argmax(np.abs(alpha[ties]))])
            p = int(basis[r])
            basis[r] = q
            at_upper[p] = leave_upper
            at_upper[q] = False
        return LpResult(LpStatus.ITERATION_LIMIT, None, None, -np.inf, None, limit)

    def _finish(self, status: LpStatus, y: np.ndarray, state: BasisState, it: int, d: np.ndarray) -> LpResult:
        n = self.inst.n_vars
        z = y[:n].copy()
        lam = float(y[n]) if self.inst.has_continuous else None
        value = float(-self.cost[: self.n_struct] @ y[: self.n_struct])
        return LpResult(status, z, lam, value, state, it, -d[:n])


def lp_relaxation(inst: IlpInstance, fixed: dict[int, float] | None = None) -> LpResult:
    """Solve the box relaxation, optionally with some coordinates fixed to +-c."""
    c = inst.amplitude
    lo = np.full(inst.n_vars, -c)
    hi = np.full(inst.n_vars, c)
    for j, val in (fixed or {}).items():
        lo[j] = hi[j] = val
    return DualSimplex(inst).solve(lo, hi)
