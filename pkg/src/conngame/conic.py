"""Solver-agnostic conic program representation and a verified backend.

A ConicProgram is a flat vector of scalar variables with
  - a linear objective (always maximize),
  - affine equality rows       A x = b,
  - affine inequality rows     G x >= h,
  - PSD blocks                 F0 + sum_k x_k F_k  is positive semidefinite.

The program is self-contained: it can be dumped to JSON for cross-solver
verification, and `residuals` evaluates constraint satisfaction of any
candidate vector independently of whatever solver produced it. The bundled
backend runs CLARABEL through cvxpy, but nothing downstream trusts the
solver's status flag alone: callers re-verify the primal residual contract
(max violation <= 1e-7) through this module before accepting an outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, NumericalTrouble

#: primal residual bound a solution must meet to count as Optimal
RESIDUAL_TOLERANCE = 1e-7


@dataclass(frozen=True)
class VariableBlock:
    name: str
    size: int


@dataclass(frozen=True)
class PsdBlock:
    """Affine matrix constraint F0 + sum_k x_k F_k >= 0 (PSD order)."""

    dim: int
    constant: np.ndarray
    terms: tuple[tuple[int, np.ndarray], ...]  # (flat variable index, symmetric matrix)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        M = self.constant.copy()
        for k, F in self.terms:
            M += x[k] * F
        return M


@dataclass(frozen=True)
class ConicProgram:
    blocks: tuple[VariableBlock, ...]
    objective: np.ndarray  # maximize objective . x
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    ineq_lhs: np.ndarray  # ineq_lhs x >= ineq_rhs
    ineq_rhs: np.ndarray
    psd_blocks: tuple[PsdBlock, ...]

    @property
    def total_size(self) -> int:
        return sum(b.size for b in self.blocks)

    def slice_of(self, name: str) -> slice:
        off = 0
        for b in self.blocks:
            if b.name == name:
                return slice(off, off + b.size)
            off += b.size
        raise InvalidSpec(f"no variable block named {name!r}")

    def validate(self):
        N = self.total_size
        if self.objective.shape != (N,):
            raise InvalidSpec("objective length mismatch")
        if self.eq_lhs.shape[1] != N or self.eq_lhs.shape[0] != self.eq_rhs.shape[0]:
            raise InvalidSpec("equality shape mismatch")
        if self.ineq_lhs.shape[1] != N or self.ineq_lhs.shape[0] != self.ineq_rhs.shape[0]:
            raise InvalidSpec("inequality shape mismatch")
        for blk in self.psd_blocks:
            if blk.constant.shape != (blk.dim, blk.dim):
                raise InvalidSpec("PSD constant shape mismatch")
            for k, F in blk.terms:
                if not (0 <= k < N):
                    raise InvalidSpec(f"PSD term references variable {k} outside 0..{N-1}")
                if F.shape != (blk.dim, blk.dim):
                    raise InvalidSpec("PSD term shape mismatch")

    def residuals(self, x: np.ndarray) -> "Residuals":
        eq = self.eq_lhs @ x - self.eq_rhs if self.eq_lhs.size else np.zeros(0)
        ineq = self.ineq_rhs - self.ineq_lhs @ x if self.ineq_lhs.size else np.zeros(0)
        psd_min = 0.0
        for blk in self.psd_blocks:
            M = blk.evaluate(x)
            smallest = float(np.linalg.eigvalsh((M + M.T) / 2)[0])
            psd_min = min(psd_min, smallest)
        return Residuals(
            eq_max=float(np.max(np.abs(eq))) if eq.size else 0.0,
            ineq_max=float(np.max(np.clip(ineq, 0.0, None))) if ineq.size else 0.0,
            psd_min_eig=psd_min,
        )

    def to_json_dict(self) -> dict:
        return {
            "variables": [{"name": b.name, "size": b.size} for b in self.blocks],
            "objective": {"sense": "maximize", "coefficients": self.objective.tolist()},
            "equalities": {"lhs": self.eq_lhs.tolist(), "rhs": self.eq_rhs.tolist()},
            "inequalities_ge": {"lhs": self.ineq_lhs.tolist(), "rhs": self.ineq_rhs.tolist()},
            "psd_blocks": [
                {
                    "dim": blk.dim,
                    "constant": blk.constant.tolist(),
                    "terms": [{"variable": k, "matrix": F.tolist()} for (k, F) in blk.terms],
                }
                for blk in self.psd_blocks
            ],
        }


@dataclass(frozen=True)
class Residuals:
    eq_max: float
    ineq_max: float
    psd_min_eig: float

    def within(self, tol: float = RESIDUAL_TOLERANCE) -> bool:
        return self.eq_max <= tol and self.ineq_max <= tol and self.psd_min_eig >= -tol

    @property
    def worst(self) -> float:
        return max(self.eq_max, self.ineq_max, -self.psd_min_eig)


def program_from_json_dict(obj: dict) -> ConicProgram:
    blocks = tuple(VariableBlock(v["name"], int(v["size"])) for v in obj["variables"])
    psd = tuple(
        PsdBlock(
            dim=int(b["dim"]),
            constant=np.asarray(b["constant"], dtype=float),
            terms=tuple((int(t["variable"]), np.asarray(t["matrix"], dtype=float)) for t in b["terms"]),
        )
        for b in obj["psd_blocks"]
    )
    n = sum(b.size for b in blocks)
    prog = ConicProgram(
        blocks=blocks,
        objective=np.asarray(obj["objective"]["coefficients"], dtype=float),
        eq_lhs=np.asarray(obj["equalities"]["lhs"], dtype=float).reshape(len(obj["equalities"]["rhs"]), n),
        eq_rhs=np.asarray(obj["equalities"]["rhs"], dtype=float),
        ineq_lhs=np.asarray(obj["inequalities_ge"]["lhs"], dtype=float).reshape(len(obj["inequalities_ge"]["rhs"]), n),
        ineq_rhs=np.asarray(obj["inequalities_ge"]["rhs"], dtype=float),
        psd_blocks=psd,
    )
    prog.validate()
    return prog


@dataclass(frozen=True)
class BackendSolution:
    """Raw result of one backend invocation, prior to verification."""

    status: str  # backend's own vocabulary, e.g. "optimal"
    x: np.ndarray | None
    objective_value: float | None
    iterations: int
    backend: str
    settings: dict = field(default_factory=dict)


class ProgramBuilder:
    """Incremental construction helper producing a validated ConicProgram."""

    def __init__(self):
        self._blocks: list[VariableBlock] = []
        self._offsets: dict[str, int] = {}
        self._eq: list[tuple[np.ndarray, float]] = []
        self._ineq: list[tuple[np.ndarray, float]] = []
        self._psd: list[PsdBlock] = []
        self._objective: np.ndarray | None = None

    def add_block(self, name: str, size: int) -> slice:
        if name in self._offsets:
            raise InvalidSpec(f"duplicate variable block {name!r}")
        off = sum(b.size for b in self._blocks)
        self._blocks.append(VariableBlock(name, size))
        self._offsets[name] = off
        return slice(off, off + size)

    @property
    def total_size(self) -> int:
        return sum(b.size for b in self._blocks)

    def row(self) -> np.ndarray:
        return np.zeros(self.total_size)

    def add_eq(self, coeffs: np.ndarray, rhs: float):
        self._eq.append((np.asarray(coeffs, dtype=float), float(rhs)))

    def add_ineq_ge(self, coeffs: np.ndarray, rhs: float):
        self._ineq.append((np.asarray(coeffs, dtype=float), float(rhs)))

    def add_psd(self, dim: int, constant: np.ndarray, terms: dict[int, np.ndarray]):
        sym_terms = []
        for k, F in sorted(terms.items()):
            F = np.asarray(F, dtype=float)
            sym_terms.append((int(k), (F + F.T) / 2))
        self._psd.append(PsdBlock(dim=dim, constant=(constant + constant.T) / 2, terms=tuple(sym_terms)))

    def set_objective_max(self, coeffs: np.ndarray):
        self._objective = np.asarray(coeffs, dtype=float)

    def build(self) -> ConicProgram:
        N = self.total_size
        if self._objective is None:
            raise InvalidSpec("objective not set")

        def stack(rows, width):
            if not rows:
                return np.zeros((0, width)), np.zeros(0)
            lhs = np.vstack([r for (r, _) in rows])
            rhs = np.array([b for (_, b) in rows])
            return lhs, rhs

        eq_lhs, eq_rhs = stack(self._eq, N)
        ineq_lhs, ineq_rhs = stack(self._ineq, N)
        prog = ConicProgram(
            blocks=tuple(self._blocks),
            objective=self._objective,
            eq_lhs=eq_lhs,
            eq_rhs=eq_rhs,
            ineq_lhs=ineq_lhs,
            ineq_rhs=ineq_rhs,
            psd_blocks=tuple(self._psd),
        )
        prog.validate()
        return prog


def solve_program(program: ConicProgram, settings: dict | None = None) -> BackendSolution:
    """Solve through cvxpy with the CLARABEL interior-point backend.

    The backend is deterministic: identical programs produce bitwise-identical
    solutions. Fails loudly (NumericalTrouble) only on unexpected backend
    exceptions; status interpretation is the caller's job.
    """
    import cvxpy as cp

    settings = dict(settings or {})
    x = cp.Variable(program.total_size)
    cons = []
    if program.eq_lhs.size:
        cons.append(program.eq_lhs @ x == program.eq_rhs)
    if program.ineq_lhs.size:
        cons.append(program.ineq_lhs @ x >= program.ineq_rhs)
    for blk in program.psd_blocks:
        expr = cp.Constant(blk.constant)
        for k, F in blk.terms:
            expr = expr + cp.multiply(x[k], cp.Constant(F))
        cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Maximize(program.objective @ x), cons)
    try:
        prob.solve(solver=cp.CLARABEL, **settings)
    except cp.error.SolverError as exc:
        raise NumericalTrouble(f"backend failed outright: {exc}") from exc
    xv = None if x.value is None else np.asarray(x.value, dtype=float)
    iters = getattr(prob.solver_stats, "num_iters", None) or 0
    return BackendSolution(
        status=str(prob.status),
        x=xv,
        objective_value=None if prob.value is None else float(prob.value),
        iterations=int(iters),
        backend="clarabel",
        settings=settings,
    )
