"""Best-first branch-and-bound over z in {-c, +c}^n using the dual simplex relaxation."""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .ilp import IlpInstance
from .lp import BasisState, DualSimplex, LpStatus

DEFAULT_NODE_LIMIT = 1_000_000


class BnbStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NODE_LIMIT = "NodeLimit"
    TARGET_REACHED = "TargetReached"


@dataclass(frozen=True)
class BnbResult:
    status: BnbStatus
    z: np.ndarray | None
    value: float
    lam: float | None
    bound: float
    nodes: int

    @property
    def gap(self) -> float:
        if self.z is None:
            return np.inf
        return max(0.0, self.bound - self.value)

    @property
    def found(self) -> bool:
        return self.z is not None


@dataclass
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    warm: BasisState | None
    depth: int


def _snap(z: np.ndarray, c: float) -> np.ndarray:
    return np.where(z >= 0, c, -c)


def _evaluate(inst: IlpInstance, z: np.ndarray) -> tuple[float, float | None] | None:
    """Objective and lambda of an integral point, or None when infeasible."""
    if inst.has_continuous:
        lam = inst.lambda_at(z)
        if not np.isfinite(lam):
            return None
        return float(inst.objective @ z) + lam, lam
    slack = inst.constraint_matrix @ z - inst.rhs
    if np.any(slack < -1e-9 * (1.0 + np.abs(inst.rhs))):
        return None
    return float(inst.objective @ z), None


def _one_flip_polish(inst: IlpInstance, z: np.ndarray, value: float) -> tuple[np.ndarray, float]:
    """Greedy best-improvement single-coordinate flips that keep z feasible."""
    a = inst.constraint_matrix
    obj = inst.objective
    tol = 1e-9 * (1.0 + np.abs(inst.rhs))
    z = z.copy()
    for _ in range(z.size):
        slack = a @ z - inst.rhs
        # column j of new_slack is the slack vector after flipping z_j
        new_slack = slack[:, None] - 2.0 * a * z[None, :]
        gain = -2.0 * obj * z
        if inst.has_continuous:
            cp = inst.coupling
            pos = cp > 0
            lam = np.min(new_slack[pos] / cp[pos, None], axis=0) if a.shape[0] else np.zeros(z.size)
            rest = ~pos
            ok = np.all(new_slack[rest] - cp[rest, None] * lam[None, :] >= -tol[rest, None], axis=0)
            cand = np.where(ok, float(obj @ z) + gain + lam, -np.inf)
        else:
            ok = np.all(new_slack >= -tol[:, None], axis=0) if a.shape[0] else np.ones(z.size, dtype=bool)
            cand = np.where(ok, float(obj @ z) + gain, -np.inf)
        j = int(np.argmax(cand))
        if not cand[j] > value + 1e-12 * max(1.0, abs(value)):
            break
        z[j] = -z[j]
        value = float(cand[j])
    return z, value


def _rounding_margin(inst: IlpInstance) -> np.ndarray:
    """Per-row slack that absorbs rounding every fractional coordinate of a basic LP point.

    A basic solution has at most n_rows fractional structural coordinates and
    nearest rounding moves each by at most c.
    """
    a = np.abs(inst.constraint_matrix)
    k = min(inst.n_rows, inst.n_vars)
    if k == 0:
        return np.zeros(inst.n_rows)
    top = -np.partition(-a, k - 1, axis=1)[:, :k]
    return inst.amplitude * top.sum(axis=1)


def _branch_index(inst: IlpInstance, z: np.ndarray, frac: np.ndarray, col_norm: np.ndarray) -> int:
    c = inst.amplitude
    room = np.where(frac, c - np.abs(z), 0.0)
    score = np.abs(inst.objective) * room
    if score.max() <= 0.0:
        score = col_norm * room
    if score.max() <= 0.0:
        score = room
    return int(np.argmax(score))


def solve_bnb(
    inst: IlpInstance,
    warm_start: np.ndarray | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
    target: float | None = None,
    int_tol: float = 1e-9,
    dive_every: int = 256,
) -> BnbResult:
    """Maximize an :class:`IlpInstance` exactly (up to ``node_limit`` LP solves).

    ``warm_start`` seeds the incumbent when feasible. With ``target`` set the
    search stops as soon as an incumbent reaches it.
    """
    c = inst.amplitude
    n = inst.n_vars
    solver = DualSimplex(inst)
    margin = _rounding_margin(inst)

    def tightened_rounding(lo: np.ndarray, hi: np.ndarray, probes: int = 6) -> int:
        """Round LP points of rhs + theta * margin, bisecting theta in [0, 1]."""
        t_lo, t_hi = 0.0, 1.0
        spent = 0
        for _ in range(probes):
            theta = t_hi if spent == 0 else 0.5 * (t_lo + t_hi)
            tight = IlpInstance(inst.objective, inst.constraint_matrix, inst.rhs + theta * margin, c, inst.coupling)
            res = DualSimplex(tight).solve(lo, hi)
            spent += 1
            if res.status is not LpStatus.OPTIMAL:
                t_hi = theta
                continue
            zr = _snap(res.z, c)
            if _evaluate(inst, zr) is None:
                t_lo = theta
            else:
                offer(zr)
                t_hi = theta
        return spent
    col_norm = np.linalg.norm(inst.constraint_matrix, axis=0)

    best_z: np.ndarray | None = None
    best_val = -np.inf
    best_lam: float | None = None

    def offer(z: np.ndarray) -> None:
        nonlocal best_z, best_val, best_lam
        got = _evaluate(inst, z)
        if got is None or not got[0] > best_val:
            return
        z, _ = _one_flip_polish(inst, z, got[0])
        best_val, best_lam = _evaluate(inst, z)
        best_z = z.copy()

    def dive(lo: np.ndarray, hi: np.ndarray, res, budget: int) -> int:
        """Depth-first rounding probe from an LP solution; returns LP solves spent."""
        spent = 0
        lo, hi = lo.copy(), hi.copy()
        while spent < budget:
            z = res.z
            frac = np.abs(z) < c * (1.0 - int_tol)
            if not np.any(frac):
                offer(_snap(z, c))
                return spent
            if res.value <= prune_level():
                return spent
            j = _branch_index(inst, z, frac, col_norm)
            for val in ((c, -c) if z[j] >= 0 else (-c, c)):
                if spent >= budget:
                    return spent
                lo[j] = hi[j] = val
                nxt = solver.solve(lo, hi, res.basis)
                spent += 1
                if nxt.status is LpStatus.OPTIMAL:
                    break
            else:
                return spent
            res = nxt
        return spent

    if warm_start is not None:
        offer(_snap(np.asarray(warm_start, dtype=float), c))

    def reached() -> bool:
        return target is not None and best_z is not None and best_val >= target

    def prune_level() -> float:
        return best_val + 1e-9 * max(1.0, abs(best_val)) if best_z is not None else -np.inf

    counter = itertools.count()
    heap: list = []
    root = _Node(np.full(n, -c), np.full(n, c), None, 0)
    heapq.heappush(heap, (-np.inf, 0, next(counter), root))
    nodes = 0
    open_bound = np.inf
    hit_limit = False

    while heap:
        if reached():
            return BnbResult(BnbStatus.TARGET_REACHED, best_z, best_val, best_lam, np.inf, nodes)
        neg_bound, _, _, node = heapq.heappop(heap)
        if -neg_bound <= prune_level():
            continue
        if nodes >= node_limit:
            heapq.heappush(heap, (neg_bound, 0, next(counter), node))
            hit_limit = True
            break
        nodes += 1
        res = solver.solve(node.lo, node.hi, node.warm)
        if res.status is LpStatus.INFEASIBLE:
            continue
        if res.status is not LpStatus.OPTIMAL:
            raise RuntimeError("LP relaxation did not converge")
        if nodes == 1:
            open_bound = res.value
        if res.value <= prune_level():
            continue
        z = res.z
        offer(_snap(z, c))
        if nodes == 1 or nodes % dive_every == 0:
            # heuristics draw on the same LP budget as branching
            nodes += tightened_rounding(node.lo, node.hi, probes=min(6, node_limit - nodes))
            nodes += dive(node.lo, node.hi, res, node_limit - nodes)
        lo_n, hi_n = node.lo.copy(), node.hi.copy()
        if best_z is not None:
            # moving nonbasic z_j across the box costs at least |d_j| * 2c of bound
            slack = res.value - best_val
            basic = np.zeros(n, dtype=bool)
            basic[res.basis.basis[res.basis.basis < n]] = True
            free = (lo_n < hi_n) & ~basic
            fix = free & (np.abs(res.reduced_costs) * 2.0 * c > slack + 1e-9 * max(1.0, abs(best_val)))
            lo_n[fix] = hi_n[fix] = np.where(z[fix] >= 0, c, -c)
        frac = np.abs(z) < c * (1.0 - int_tol)
        if not np.any(frac):
            # integral relaxation: its LP value is exact for this subtree
            offer(_snap(z, c))
            continue
        j = _branch_index(inst, z, frac, col_norm)
        first = c if z[j] >= 0 else -c
        for val in (first, -first):
            lo, hi = lo_n.copy(), hi_n.copy()
            lo[j] = hi[j] = val
            heapq.heappush(heap, (-res.value, -(node.depth + 1), next(counter), _Node(lo, hi, res.basis, node.depth + 1)))

    if reached():
        return BnbResult(BnbStatus.TARGET_REACHED, best_z, best_val, best_lam, np.inf, nodes)
    if hit_limit:
        bound = max(best_val, max(-h[0] for h in heap)) if heap else best_val
        return BnbResult(BnbStatus.NODE_LIMIT, best_z, best_val, best_lam, min(bound, open_bound), nodes)
    if best_z is None:
        return BnbResult(BnbStatus.INFEASIBLE, None, -np.inf, None, -np.inf, nodes)
    return BnbResult(BnbStatus.OPTIMAL, best_z, best_val, best_lam, best_val, nodes)


def enumerate_ilp(inst: IlpInstance) -> tuple[np.ndarray | None, float]:
    """Exhaustive reference solver for small instances (n <= 20)."""
    n = inst.n_vars
    if n > 20:
        raise ValueError("enumeration is limited to 20 variables")
    c = inst.amplitude
    best_z, best_val = None, -np.inf
    for bits in itertools.product((-c, c), repeat=n):
        z = np.asarray(bits)
        got = _evaluate(inst, z)
        if got is not None and got[0] > best_val:
            best_z, best_val = z, got[0]
    return best_z, best_val
