"""Real-valued ILP instances over the box {-c, +c}^{2N} and their text format."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_HEADER = "# onebit-isac ilp v1"


@dataclass(frozen=True)
class IlpInstance:
    """maximize objective^T z (+ lambda)  s.t.  A z - coupling * lambda >= rhs,  z in {-c, c}^n.

    With ``coupling`` set the instance carries one extra continuous variable
    ``lambda`` that is added to the objective (max-min epigraph form).
    """

    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    amplitude: float
    coupling: np.ndarray | None = None

    def __post_init__(self) -> None:
        obj = np.asarray(self.objective, dtype=float).ravel()
        a = np.asarray(self.constraint_matrix, dtype=float).reshape(-1, obj.size)
        rhs = np.asarray(self.rhs, dtype=float).ravel()
        if rhs.size != a.shape[0]:
            raise ValueError("rhs length must match the number of constraint rows")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "constraint_matrix", a)
        object.__setattr__(self, "rhs", rhs)
        if self.coupling is not None:
            cp = np.asarray(self.coupling, dtype=float).ravel()
            if cp.size != a.shape[0]:
                raise ValueError("coupling length must match the number of constraint rows")
            if not np.any(cp > 0):
                raise ValueError("a continuous variable needs at least one row with positive coupling")
            object.__setattr__(self, "coupling", cp)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    @property
    def has_continuous(self) -> bool:
        return self.coupling is not None

    def lambda_at(self, z: np.ndarray) -> float:
        """Largest feasible lambda for a fixed z; -inf when some plain row fails."""
        slack = self.constraint_matrix @ z - self.rhs
        cp = self.coupling
        pos = cp > 0
        lam = float(np.min(slack[pos] / cp[pos]))
        rest = ~pos
        if np.any(rest):
            # rows with coupling <= 0 must hold at this lambda
            need = slack[rest] - cp[rest] * lam
            if np.any(need < -1e-9 * (1.0 + np.abs(self.rhs[rest]))):
                return -np.inf
        return lam

    def value(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        val = float(self.objective @ z)
        if self.has_continuous:
            val += self.lambda_at(z)
        return val

    def is_feasible(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        if not np.allclose(np.abs(z), self.amplitude, rtol=0, atol=1e-12 * self.amplitude):
            return False
        if self.has_continuous:
            return bool(np.isfinite(self.lambda_at(z)))
        slack = self.constraint_matrix @ z - self.rhs
        return bool(np.all(slack >= -tol * (1.0 + np.abs(self.rhs))))


def realify(
    w_row: np.ndarray,
    a_rows: np.ndarray,
    rhs: np.ndarray,
    amplitude: float,
    coupling: np.ndarray | None = None,
) -> IlpInstance:
    """Map Re(w_row x) and Re(a_k x) to real form on z = [Re x; Im x].

    Rows act on x by plain multiplication, so a Hermitian product w^H x is
    passed as ``w_row = conj(w)``. Then Re(r x) = [Re r, -Im r] . z.
    """
    w_row = np.asarray(w_row, dtype=complex).ravel()
    a_rows = np.asarray(a_rows, dtype=complex).reshape(-1, w_row.size)
    return IlpInstance(
        objective=np.concatenate([w_row.real, -w_row.imag]),
        constraint_matrix=np.hstack([a_rows.real, -a_rows.imag]),
        rhs=np.asarray(rhs, dtype=float),
        amplitude=amplitude,
        coupling=coupling,
    )


def to_complex(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    n = z.size // 2
    return z[:n] + 1j * z[n:]


def to_real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag])


def dumps(inst: IlpInstance) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADER + "\n")
    out.write(f"amplitude {inst.amplitude!r}\n")
    out.write(f"continuous {int(inst.has_continuous)}\n")
    out.write("objective " + " ".join(repr(float(v)) for v in inst.objective) + "\n")
    coupling = inst.coupling if inst.coupling is not None else np.zeros(inst.n_rows)
    for k in range(inst.n_rows):
        coeffs = " ".join(repr(float(v)) for v in inst.constraint_matrix[k])
        out.write(f"row {float(inst.rhs[k])!r} {float(coupling[k])!r} {coeffs}\n")
    return out.getvalue()


def loads(text: str) -> IlpInstance:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError("missing ILP header line")
    amplitude = None
    continuous = None
    objective = None
    rows, rhs, coupling = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        key, _, rest = line.partition(" ")
        try:
            values = [float(t) for t in rest.split()]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad number ({exc})") from None
        if key == "amplitude":
            amplitude = values[0]
        elif key == "continuous":
            continuous = bool(int(values[0]))
        elif key == "objective":
            objective = np.asarray(values)
        elif key == "row":
            if objective is None or len(values) != objective.size + 2:
                raise ValueError(f"line {lineno}: row width does not match the objective")
            rhs.append(values[0])
            coupling.append(values[1])
            rows.append(values[2:])
        else:
            raise ValueError(f"line {lineno}: unknown record {key!r}")
    if amplitude is None or continuous is None or objective is None:
        raise ValueError("ILP file lacks amplitude, continuous or objective")
    a = np.asarray(rows, dtype=float).reshape(len(rows), objective.size)
    return IlpInstance(
        objective=objective,
        constraint_matrix=a,
        rhs=np.asarray(rhs),
        amplitude=amplitude,
        coupling=np.asarray(coupling) if continuous else None,
    )


def dump(inst: IlpInstance, path: str | Path) -> None:
    Path(path).write_text(dumps(inst))


def load(path: str | Path) -> IlpInstance:
    return loads(Path(path).read_text())
