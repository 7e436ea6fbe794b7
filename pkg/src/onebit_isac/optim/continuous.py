"""Linear programs over the power ball ||z||^2 <= E for the infinite-resolution DAC.

The problem  max t  s.t.  A z - coupling * t >= rhs,  ||z||^2 <= E  is solved by
bisection on t. Each probe asks whether the polyhedron {A z >= rhs + coupling t}
has a point of norm at most sqrt(E), answered exactly by a least-distance
program reduced to NNLS. The final point is moved onto the sphere along the
null space of the nearly tight rows, so no constraint is lost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import nnls


@dataclass(frozen=True)
class BallResult:
    feasible: bool
    z: np.ndarray | None
    value: float
    probes: int


def min_norm_point(g: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    """Least-norm z with g z >= h, or None if the set is empty."""
    n = g.shape[1]
    if g.shape[0] == 0:
        return np.zeros(n)
    e = np.vstack([g.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(e, f, maxiter=50 * e.shape[1])
    r = e @ u - f
    if abs(r[-1]) < 1e-14:
        return None
    return -r[:-1] / r[-1]


def _row_level(a: np.ndarray, rhs: np.ndarray, coupling: np.ndarray, z: np.ndarray) -> float:
    pos = coupling > 0
    return float(np.min((a[pos] @ z - rhs[pos]) / coupling[pos]))


def _fits(a, h, z, energy) -> bool:
    tol = 1e-9 * (1.0 + np.abs(h))
    return bool(np.all(a @ z >= h - tol) and z @ z <= energy * (1.0 + 1e-9))


def lift_to_sphere(
    z: np.ndarray, a: np.ndarray, energy: float, reference: np.ndarray | None = None, rhs: np.ndarray | None = None
) -> np.ndarray:
    """Reach ||z||^2 = E along null(active rows), so tight rows keep their value.

    Falls back to radial scaling when the active rows span the space.
    """
    gap = energy - float(z @ z)
    if abs(gap) <= 1e-15 * energy:
        return z
    if gap < 0:
        return z * np.sqrt(energy / float(z @ z))
    active = a
    if rhs is not None and a.shape[0]:
        slack = a @ z - rhs
        # the step has length <= sqrt(gap), so only rows this close can be broken
        reach = np.linalg.norm(a, axis=1) * np.sqrt(gap)
        active = a[slack <= reach + 1e-12 * (1.0 + np.abs(rhs))]
    basis = null_space(active) if active.shape[0] else np.eye(z.size)
    if basis.shape[1] == 0:
        return z * np.sqrt(energy / float(z @ z))
    d = np.zeros(z.size)
    if reference is not None:
        d = basis @ (basis.T @ reference)
    if np.linalg.norm(d) < 1e-12:
        d = basis[:, 0]
    d = d / np.linalg.norm(d)
    b = float(z @ d)
    step = -b + np.sqrt(b * b + gap)
    return z + step * d


def maximize_over_ball(
    a: np.ndarray,
    rhs: np.ndarray,
    coupling: np.ndarray,
    energy: float,
    witness: np.ndarray | None = None,
    reference: np.ndarray | None = None,
    rel_tol: float = 1e-15,
    max_probes: int = 200,
) -> BallResult:
    """Solve the epigraph problem; ``witness`` is an optional known feasible point.

    The final lift moves the point by about sqrt(norm gap), so the bisection
    runs to machine precision to keep the maximiser itself accurate.
    """
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    coupling = np.asarray(coupling, dtype=float)
    if not np.any(coupling > 0):
        raise ValueError("at least one row must carry the epigraph variable")
    pos = coupling > 0
    radius = np.sqrt(energy)
    t_hi = float(np.min((radius * np.linalg.norm(a[pos], axis=1) - rhs[pos]) / coupling[pos]))

    z_lo = None
    t_lo = -np.inf
    if witness is not None and _fits(a, rhs + coupling * _row_level(a, rhs, coupling, witness), witness, energy):
        z_lo = np.asarray(witness, dtype=float)
        t_lo = _row_level(a, rhs, coupling, z_lo)
    probes = 0
    if z_lo is None:
        # level reachable by the least-norm point of the unconstrained-t system
        t_lo = float(np.min((-radius * np.linalg.norm(a[pos], axis=1) - rhs[pos]) / coupling[pos]))
        z_lo = min_norm_point(a, rhs + coupling * t_lo)
        probes += 1
        if z_lo is None or z_lo @ z_lo > energy * (1.0 + 1e-12):
            return BallResult(False, None, -np.inf, probes)
        t_lo = _row_level(a, rhs, coupling, z_lo)

    while t_hi - t_lo > rel_tol * max(1.0, abs(t_lo)) and probes < max_probes:
        mid = 0.5 * (t_lo + t_hi)
        if not t_lo < mid < t_hi:
            break
        z = min_norm_point(a, rhs + coupling * mid)
        probes += 1
        if z is not None and z @ z <= energy:
            z_lo, t_lo = z, max(mid, _row_level(a, rhs, coupling, z))
        else:
            t_hi = mid
    z = lift_to_sphere(z_lo, a, energy, reference, rhs + coupling * t_lo)
    return BallResult(True, z, _row_level(a, rhs, coupling, z), probes)


def feasible_point_on_sphere(
    a: np.ndarray, rhs: np.ndarray, energy: float, reference: np.ndarray | None = None
) -> np.ndarray | None:
    """Any z with a z >= rhs and ||z||^2 = E, or None when none exists."""
    a = np.asarray(a, dtype=float)
    z = min_norm_point(a, np.asarray(rhs, dtype=float))
    if z is None or z @ z > energy * (1.0 + 1e-12):
        return None
    return lift_to_sphere(z, a, energy, reference, np.asarray(rhs, dtype=float))
