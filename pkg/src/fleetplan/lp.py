"""Self-contained dense linear programming toolkit.

Provides a two-phase primal simplex on a dense tableau with general variable
bounds, a lexicographic two-stage solve (constrain stage 1 to its optimum,
then reoptimize stage 2), and a best-first branch and bound for programs
whose integer variables are binary. No external solver is used anywhere.

Variables may carry finite lower bounds and optional upper bounds; equalities
between a variable and a constant are expressed as lb == ub and cost nothing
during pivoting. The pivot loop is compiled with numba; pivot selection is
largest reduced cost with a switch to Bland's rule after a run of degenerate
steps, which in practice stops cycling on the degenerate transportation-like
programs this package produces.
"""

from __future__ import annotations

import heapq
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NumericalError

_STATUS_OPTIMAL = 0
_STATUS_UNBOUNDED = 1
_STATUS_ITER_LIMIT = 2
_STATUS_BREAKDOWN = 3
_STATUS_REFRESH = 4

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2


@dataclass(frozen=True)
class ToleranceConfig:
    """Numeric tolerances; eps_lex is relative to max(1, |stage-1 optimum|)."""

    eps_feas: float = 1e-7
    eps_opt: float = 1e-7
    eps_int: float = 1e-6
    eps_lex: float = 1e-6
    eps_pivot: float = 1e-10
    bland_after: int = 60
    max_iterations: int = 0

    def iteration_cap(self, num_rows: int, num_cols: int) -> int:
        if self.max_iterations > 0:
            return self.max_iterations
        return 2000 + 50 * (num_rows + num_cols)


DEFAULT_TOLERANCES = ToleranceConfig()

_RELATIONS = ("<=", "=", ">=")


@dataclass
class LinearProgram:
    """max/min objective @ x subject to a @ x (<=, =, >=) b and lb <= x <= ub."""

    objective: np.ndarray
    maximize: bool
    a: np.ndarray
    relations: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=np.float64)
        self.a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        self.b = np.asarray(self.b, dtype=np.float64)
        self.relations = tuple(self.relations)
        n = self.objective.shape[0]
        if self.a.size == 0:
            self.a = self.a.reshape(0, n)
        m = self.a.shape[0]
        if self.a.shape != (m, n):
            raise ValueError(f"constraint matrix shape {self.a.shape} does not match {n} variables")
        if self.b.shape != (m,):
            raise ValueError(f"rhs shape {self.b.shape} does not match {m} constraints")
        if len(self.relations) != m:
            raise ValueError(f"{len(self.relations)} relations for {m} constraints")
        for rel in self.relations:
            if rel not in _RELATIONS:
                raise ValueError(f"unknown relation {rel!r}")
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=np.float64)
        if self.ub is None:
            self.ub = np.full(n, np.inf)
        else:
            self.ub = np.asarray(self.ub, dtype=np.float64)
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bound shapes do not match the variable count")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("constraint data must be finite")
        if not np.all(np.isfinite(self.lb)):
            raise ValueError("lower bounds must be finite")
        if np.any(self.ub < self.lb):
            raise ValueError("upper bound below lower bound")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class Objective:
    coefficients: np.ndarray
    maximize: bool


@dataclass
class LexicographicProgram:
    """Shared constraints with a primary and a secondary objective."""

    base: LinearProgram
    objective_1: Objective
    objective_2: Objective


@dataclass
class BinaryProgram:
    """Lexicographic program whose listed variables must end up in {0, 1}."""

    lex: LexicographicProgram
    binary_indices: tuple[int, ...]


@dataclass
class LpSolution:
    """Solver outcome.

    objective_value is the stage-1 optimum for lexicographic and binary
    solves; objective_value_2 carries the stage-2 value when one was solved.
    bound is the root relaxation value of a branch-and-bound run and proven
    is False when the node limit stopped the proof. reduced holds the
    reduced cost of each variable at the optimum (rate of objective change
    per unit moved off its bound, in the objective's own orientation).
    """

    status: str
    objective_value: float
    x: np.ndarray
    iterations: int
    objective_value_2: float | None = None
    bound: float | None = None
    proven: bool = True
    nodes: int = 0
    reduced: np.ndarray | None = None


@njit(cache=True)
def _eliminate(t_mat, d_row, r, jq):
    m, n = t_mat.shape
    inv = 1.0 / t_mat[r, jq]
    for jj in range(n):
        t_mat[r, jj] *= inv
    t_mat[r, jq] = 1.0
    for i in range(m):
        if i == r:
            continue
        f = t_mat[i, jq]
        if f != 0.0:
            for jj in range(n):
                t_mat[i, jj] -= f * t_mat[r, jj]
            t_mat[i, jq] = 0.0
    f = d_row[jq]
    if f != 0.0:
        for jj in range(n):
            d_row[jj] -= f * t_mat[r, jj]
        d_row[jq] = 0.0


@njit(cache=True)
def _run_simplex(t_mat, d_row, beta, basis, vstat, span, eps_v,
                 eps_opt, eps_pivot, bland_after, max_iter, start_iter,
                 small_ok):
    """Primal simplex pivot loop on a bounded-variable dense tableau.

    t_mat holds B^-1 A over every column, beta the current basic values,
    vstat whether each variable sits at its lower bound, upper bound, or in
    the basis, and span the width ub - lb (0 marks a fixed variable, which
    never enters). eps_v gives each variable's tolerated bound overshoot;
    the ratio test treats rows whose strict ratio fits under the relaxed
    minimum as tied and takes the largest pivot among them, so degenerate
    near-ties never force a pivot on roundoff noise. When the winning pivot
    is still tiny relative to its column the loop stops with a refresh
    request instead of executing it, unless small_ok says the tableau was
    just rebuilt and the entry can be trusted. Returns (status, iterations).
    """
    m, n = t_mat.shape
    iters = start_iter
    degen = 0
    bland = False
    while True:
        if iters >= max_iter:
            return _STATUS_ITER_LIMIT, iters
        jq = -1
        if bland:
            for j in range(n):
                if vstat[j] == _BASIC or span[j] <= 0.0:
                    continue
                sc = d_row[j] if vstat[j] == _AT_LOWER else -d_row[j]
                if sc > eps_opt:
                    jq = j
                    break
        else:
            best = eps_opt
            for j in range(n):
                if vstat[j] == _BASIC or span[j] <= 0.0:
                    continue
                sc = d_row[j] if vstat[j] == _AT_LOWER else -d_row[j]
                if sc > best:
                    best = sc
                    jq = j
        if jq < 0:
            return _STATUS_OPTIMAL, iters
        down = vstat[jq] == _AT_UPPER

        # pass 1: relaxed step limit (exact under Bland for termination)
        theta = span[jq]
        tiny = False
        col_max = 0.0
        for i in range(m):
            yi = t_mat[i, jq]
            if down:
                yi = -yi
            ay = yi if yi >= 0.0 else -yi
            if ay > col_max:
                col_max = ay
            if ay <= eps_pivot:
                if ay > 0.0:
                    tiny = True
                continue
            relax = 0.0 if bland else eps_v[basis[i]]
            if yi > 0.0:
                ti = (beta[i] + relax) / yi
            else:
                sb = span[basis[i]]
                if sb == np.inf:
                    continue
                ti = (sb - beta[i] + relax) / ay
            if ti < theta:
                theta = ti
        if theta == np.inf:
            if tiny:
                return _STATUS_BREAKDOWN, iters
            return _STATUS_UNBOUNDED, iters
        if theta < 0.0:
            theta = 0.0

        # pass 2: among rows whose strict ratio fits under theta, prefer the
        # largest pivot magnitude (smallest basis index under Bland)
        r = -1
        r_to_ub = False
        best_y = 0.0
        r_step = 0.0
        for i in range(m):
            yi = t_mat[i, jq]
            if down:
                yi = -yi
            ay = yi if yi >= 0.0 else -yi
            if ay <= eps_pivot:
                continue
            if yi > 0.0:
                ti = beta[i] / yi
                hit_ub = False
            else:
                sb = span[basis[i]]
                if sb == np.inf:
                    continue
                ti = (sb - beta[i]) / ay
                hit_ub = True
            if ti < 0.0:
                ti = 0.0
            if ti > theta:
                continue
            take = False
            if r < 0:
                take = True
            elif bland:
                if basis[i] < basis[r]:
                    take = True
            elif ay > best_y:
                take = True
            if take:
                r = i
                r_to_ub = hit_ub
                best_y = ay
                r_step = ti

        if r >= 0 and small_ok == 0 and best_y < 1e-6 * col_max:
            # winning pivot is noise-scale next to its column: rebuild first
            return _STATUS_REFRESH, iters
        delta = -1.0 if down else 1.0
        if r < 0:
            # no blocking row: move all the way to the opposite bound
            step = span[jq]
            for i in range(m):
                beta[i] -= delta * step * t_mat[i, jq]
            vstat[jq] = _AT_UPPER if vstat[jq] == _AT_LOWER else _AT_LOWER
        else:
            step = r_step
            zq = (span[jq] if down else 0.0) + delta * step
            for i in range(m):
                beta[i] -= delta * step * t_mat[i, jq]
            lv = basis[r]
            vstat[lv] = _AT_UPPER if r_to_ub else _AT_LOWER
            _eliminate(t_mat, d_row, r, jq)
            beta[r] = zq
            basis[r] = jq
            vstat[jq] = _BASIC
        iters += 1
        if step <= 1e-11:
            degen += 1
            if degen > bland_after:
                bland = True
        else:
            degen = 0
            bland = False


class _Tableau:
    """Standardized working form of one LinearProgram (internal).

    Construction folds fixed variables (lb == ub) into the right hand side
    and drops their columns, drops rows left without any free coefficient
    (flagging infeasibility outright when such a row cannot hold), and
    equilibrates the surviving rows and columns so coefficient magnitudes
    stay near one. The simplex then works on substituted variables
    u_j = col_scale_j * (x_j - lb_j).
    """

    def __init__(self, lp: LinearProgram, c_max: np.ndarray, tol: ToleranceConfig):
        self.lp = lp
        self.tol = tol
        m0, n0 = lp.num_constraints, lp.num_vars
        self.c_max = c_max
        self.build_status: str | None = None
        keep = (lp.ub - lp.lb) > 0.0
        self.keep_idx = np.flatnonzero(keep)
        n = self.keep_idx.size
        self.n_struct = n

        bshift = lp.b - lp.a @ lp.lb if m0 else np.zeros(0)
        rows_a = lp.a[:, self.keep_idx]
        live = np.zeros(m0, dtype=bool)
        if m0 and n:
            live = np.abs(rows_a).max(axis=1) > 0.0
        allow = tol.eps_feas * (1.0 + np.abs(lp.b))
        for i in np.flatnonzero(~live):
            resid = bshift[i]
            rel = lp.relations[i]
            bad = (rel == "<=" and resid < -allow[i]) or \
                  (rel == ">=" and resid > allow[i]) or \
                  (rel == "=" and abs(resid) > allow[i])
            if bad:
                self.build_status = "infeasible"
        rows_a = rows_a[live].copy()
        rhs = bshift[live].copy()
        rels = [lp.relations[i] for i in np.flatnonzero(live)]
        b_kept = lp.b[live] if m0 else np.zeros(0)
        m = rows_a.shape[0]

        slack_col: dict[int, int] = {}
        col = n
        for i, rel in enumerate(rels):
            if rel != "=":
                slack_col[i] = col
                col += 1
        self.n_slack = col - n

        slack_sign = np.zeros(m)
        for i, rel in enumerate(rels):
            if rel == "<=":
                slack_sign[i] = 1.0
            elif rel == ">=":
                slack_sign[i] = -1.0
        neg = rhs < 0
        rows_a[neg] *= -1.0
        rhs[neg] *= -1.0
        slack_sign[neg] *= -1.0

        # Equilibrate rows, then columns, then rows again so coefficient
        # magnitudes stay near one; wildly mixed scales (costs in the
        # thousands next to rates below one) let elimination roundoff grow
        # into fake pivot candidates otherwise.
        row_norm = np.ones(m)
        col_scale = np.ones(n)
        if m and n:
            r1 = np.abs(rows_a).max(axis=1)
            r1[r1 <= 0.0] = 1.0
            rows_a /= r1[:, None]
            col_scale = np.abs(rows_a).max(axis=0)
            col_scale[col_scale <= 0.0] = 1.0
            rows_a /= col_scale[None, :]
            r2 = np.abs(rows_a).max(axis=1)
            r2[r2 <= 0.0] = 1.0
            rows_a /= r2[:, None]
            row_norm = r1 * r2
            rhs /= row_norm
        self.col_scale = col_scale
        span = (lp.ub - lp.lb)[self.keep_idx] * col_scale

        art_rows = [i for i in range(m) if slack_sign[i] <= 0.0]
        self.n_art = len(art_rows)
        ncols = col + self.n_art
        t_mat = np.zeros((m, ncols))
        t_mat[:, :n] = rows_a
        for i, c in slack_col.items():
            t_mat[i, c] = slack_sign[i]
        basis = np.empty(m, dtype=np.int64)
        art_of_row = {}
        for k, i in enumerate(art_rows):
            t_mat[i, col + k] = 1.0
            art_of_row[i] = col + k
        for i in range(m):
            basis[i] = art_of_row.get(i, slack_col.get(i, -1))
        if m and np.any(basis < 0):
            raise AssertionError("row without a starting basic variable")

        full_span = np.concatenate([span, np.full(self.n_slack + self.n_art, np.inf)])
        vstat = np.full(ncols, _AT_LOWER, dtype=np.int8)
        vstat[basis] = _BASIC

        # tolerated bound overshoot per variable, sized so that even after a
        # row scale is undone the final residual stays a decade under the
        # feasibility gate (slacks live in scaled row units)
        eps_v = np.full(ncols, 1e-8)
        for i, c in slack_col.items():
            eps_v[c] = 1e-8 * (1.0 + abs(b_kept[i])) / row_norm[i]
        eps_v[col:] = 1e-12
        self.eps_v = np.clip(eps_v, 1e-12, 1e-6)
        self.t_mat = t_mat
        # pristine copies of the standardized system, used to recompute exact
        # basic values and to rebuild the tableau when drift is detected
        self.t0 = t_mat.copy()
        self.rhs0 = rhs.copy()
        self.beta = rhs.copy()
        self.basis = basis
        self.vstat = vstat
        self.span = full_span
        self.iterations = 0
        self.scale = 1.0 + (np.abs(rhs).max() if m else 0.0)

    @property
    def ncols(self) -> int:
        return self.t_mat.shape[1]

    def _cap(self) -> int:
        return self.tol.iteration_cap(self.t_mat.shape[0], self.ncols)

    def _run(self, d_row: np.ndarray, max_iter: int | None = None,
             small_ok: int = 0) -> int:
        status, iters = _run_simplex(
            self.t_mat, d_row, self.beta, self.basis, self.vstat, self.span,
            self.eps_v, self.tol.eps_opt, self.tol.eps_pivot,
            self.tol.bland_after, max_iter or self._cap(), self.iterations,
            small_ok)
        self.iterations = iters
        if status == _STATUS_ITER_LIMIT and self.iterations >= self._cap():
            raise NumericalError("simplex iteration limit exceeded")
        if status == _STATUS_BREAKDOWN:
            raise NumericalError("pivot magnitude below eps_pivot after Bland fallback")
        return status

    def _reduced_costs(self, c_ext: np.ndarray) -> np.ndarray:
        d_row = c_ext.copy()
        if self.t_mat.shape[0]:
            cb = c_ext[self.basis]
            if np.any(cb != 0.0):
                d_row -= cb @ self.t_mat
            d_row[self.basis] = 0.0
        return d_row

    def _current_rhs(self) -> np.ndarray:
        """Right hand side seen by the basis with nonbasics at their bounds."""
        rhs = self.rhs0.copy()
        up = np.flatnonzero((self.vstat == _AT_UPPER) & (self.span > 0.0)
                            & np.isfinite(self.span))
        if up.size:
            rhs -= self.t0[:, up] @ self.span[up]
        return rhs

    def _refresh(self, full: bool) -> float:
        """Recompute basic values (and optionally the whole tableau) exactly.

        Solves the pristine basis system instead of trusting incrementally
        updated numbers; returns how far beta had drifted.
        """
        m = self.t_mat.shape[0]
        if m == 0:
            return 0.0
        cols = self.t0[:, self.basis]
        try:
            if full:
                stacked = np.linalg.solve(
                    cols, np.concatenate([self._current_rhs()[:, None], self.t0],
                                         axis=1))
                beta_new = stacked[:, 0].copy()
                t_new = np.ascontiguousarray(stacked[:, 1:])
                t_new[:, self.basis] = 0.0
                t_new[np.arange(m), self.basis] = 1.0
                self.t_mat = t_new
            else:
                beta_new = np.linalg.solve(cols, self._current_rhs())
        except np.linalg.LinAlgError as exc:
            raise NumericalError("basis matrix became singular") from exc
        drift = float(np.max(np.abs(beta_new - self.beta)))
        self.beta = beta_new
        return drift

    def _entering_exists(self, d_row: np.ndarray) -> bool:
        free = self.span > 0.0
        lo = (self.vstat == _AT_LOWER) & free
        up = (self.vstat == _AT_UPPER) & free
        eps = self.tol.eps_opt
        return bool(np.any(d_row[lo] > eps) or np.any(d_row[up] < -eps))

    def _optimize(self, c_ext: np.ndarray) -> str:
        """Pivot until optimality certifies against the pristine system.

        The kernel runs in short bursts; after every burst the basic values
        are recomputed exactly from the pristine system so the ratio test
        never acts on stale numbers for long, and the tableau itself is
        rebuilt whenever they had wandered. At each claimed optimum the
        reduced costs and primal feasibility are rechecked; if either fails
        to verify, pivoting resumes.
        """
        unbounded_once = False
        certify_rounds = 0
        while True:
            d_row = self._reduced_costs(c_ext)
            burst = min(self._cap(), self.iterations + 250)
            status = self._run(d_row, burst)
            if self._refresh(full=False) > 1e-9:
                self._refresh(full=True)
            if status == _STATUS_ITER_LIMIT:
                # burst exhausted below the global cap: keep going
                continue
            if status == _STATUS_REFRESH:
                # rebuild, then let one verified pivot through
                self._refresh(full=True)
                d_row = self._reduced_costs(c_ext)
                self._run(d_row, self.iterations + 1, small_ok=1)
                self._refresh(full=False)
                continue
            if status == _STATUS_UNBOUNDED:
                if unbounded_once:
                    return "unbounded"
                unbounded_once = True
                self._refresh(full=True)
                continue
            over = self.beta - self.span[self.basis]
            over = over[np.isfinite(over)]
            infeas = max(0.0, float(-self.beta.min()) if self.beta.size else 0.0,
                         float(over.max()) if over.size else 0.0)
            fresh = self._reduced_costs(c_ext)
            if infeas <= 1e-6 and not self._entering_exists(fresh):
                self.d_row = fresh
                return "optimal"
            certify_rounds += 1
            if certify_rounds >= 12:
                raise NumericalError("simplex failed to certify an optimal basis")
            self._refresh(full=True)

    def _embed(self, c_orig: np.ndarray) -> np.ndarray:
        """Map an original-units objective onto the scaled tableau columns."""
        c_ext = np.zeros(self.ncols)
        if self.n_struct:
            c_ext[:self.n_struct] = c_orig[self.keep_idx] / self.col_scale
        return c_ext

    def solve(self) -> str:
        """Phase 1 (if artificials exist) then phase 2; returns a status string."""
        if self.build_status is not None:
            return self.build_status
        m = self.t_mat.shape[0]
        if self.n_art:
            art_lo = self.n_struct + self.n_slack
            c1 = np.zeros(self.ncols)
            c1[art_lo:] = -1.0
            if self._optimize(c1) != "optimal":
                raise NumericalError("phase 1 reported an unbounded direction")
            art_sum = 0.0
            for i in range(m):
                if self.basis[i] >= art_lo:
                    art_sum += self.beta[i]
            if art_sum > self.tol.eps_feas * self.scale:
                return "infeasible"
            self._drive_out_artificials(self.d_row, art_lo)
            self.span[art_lo:] = 0.0
        return self._optimize(self._embed(self.c_max))

    def _drive_out_artificials(self, d_row: np.ndarray, art_lo: int) -> None:
        for r in range(self.t_mat.shape[0]):
            if self.basis[r] < art_lo:
                continue
            target = -1
            best = self.tol.eps_pivot
            for j in range(art_lo):
                mag = abs(self.t_mat[r, j])
                if self.span[j] > 0.0 and mag > best:
                    target = j
                    best = mag
            if target < 0:
                continue
            value = 0.0 if self.vstat[target] == _AT_LOWER else self.span[target]
            old = self.basis[r]
            _eliminate(self.t_mat, d_row, r, target)
            self.beta[r] = value
            self.basis[r] = target
            self.vstat[old] = _AT_LOWER
            self.vstat[target] = _BASIC
        self._refresh(full=True)

    def solution_x(self) -> np.ndarray:
        u = np.where(self.vstat[:self.n_struct] == _AT_UPPER,
                     self.span[:self.n_struct], 0.0)
        u[~np.isfinite(u)] = 0.0
        mask = self.basis < self.n_struct
        u[self.basis[mask]] = self.beta[mask]
        x = self.lp.lb.copy()
        if self.n_struct:
            x[self.keep_idx] += u / self.col_scale
        return x

    def append_level_constraint(self, c_max: np.ndarray, slack_value: float) -> None:
        """Append c_max @ x >= (current optimum - slack_value) to the tableau.

        Must be called at optimality of c_max. The transformed row is the
        negated reduced-cost row; the new surplus variable is basic with
        value slack_value, so no phase-1 work is needed.
        """
        c_ext = self._embed(c_max)
        d_row = self._reduced_costs(c_ext)
        rs = max(1.0, float(np.abs(c_ext).max())) if c_ext.size else 1.0
        m = self.t_mat.shape[0]

        # current stage value in shifted coordinates, for the pristine rhs
        value1 = float(c_ext[self.basis] @ self.beta) if m else 0.0
        up = np.flatnonzero((self.vstat == _AT_UPPER) & (self.span > 0.0)
                            & np.isfinite(self.span))
        if up.size:
            value1 += float(c_ext[up] @ self.span[up])

        new_row = np.concatenate([-d_row / rs, [1.0]])
        self.t_mat = np.hstack([self.t_mat, np.zeros((m, 1))])
        self.t_mat = np.vstack([self.t_mat, new_row])
        raw_row = np.concatenate([-c_ext / rs, [1.0]])
        self.t0 = np.hstack([self.t0, np.zeros((m, 1))])
        self.t0 = np.vstack([self.t0, raw_row])
        self.rhs0 = np.append(self.rhs0, (slack_value - value1) / rs)
        self.beta = np.append(self.beta, slack_value / rs)
        self.basis = np.append(self.basis, self.ncols - 1)
        self.span = np.append(self.span, np.inf)
        self.vstat = np.append(self.vstat, np.int8(_BASIC))
        eps_new = min(1e-6, max(1e-12,
                                1e-8 * (1.0 + abs(slack_value - value1)) / rs))
        self.eps_v = np.append(self.eps_v, eps_new)


def _signed_objective(coefficients: np.ndarray, maximize: bool) -> np.ndarray:
    c = np.asarray(coefficients, dtype=np.float64)
    return c if maximize else -c

def _check_primal(lp: LinearProgram, x: np.ndarray, tol: ToleranceConfig) -> None:
    if np.any(x < lp.lb - tol.eps_feas * (1.0 + np.abs(lp.lb))):
        raise NumericalError("solution drifted below a lower bound")
    finite = np.isfinite(lp.ub)
    if np.any(x[finite] > lp.ub[finite] + tol.eps_feas * (1.0 + np.abs(lp.ub[finite]))):
        raise NumericalError("solution drifted above an upper bound")
    if lp.num_constraints == 0:
        return
    ax = lp.a @ x
    allow = tol.eps_feas * (1.0 + np.abs(lp.b))
    for i, rel in enumerate(lp.relations):
        resid = ax[i] - lp.b[i]
        bad = (rel == "<=" and resid > allow[i]) or \
              (rel == ">=" and resid < -allow[i]) or \
              (rel == "=" and abs(resid) > allow[i])
        if bad:
            raise NumericalError(f"constraint {i} residual {resid:.3e} exceeds eps_feas")


def _empty_solution(lp: LinearProgram, status: str, iterations: int) -> LpSolution:
    value = np.nan
    if status == "unbounded":
        value = np.inf if lp.maximize else -np.inf
    return LpSolution(status, value, np.full(lp.num_vars, np.nan), iterations)


def solve_lp(lp: LinearProgram, tol: ToleranceConfig | None = None) -> LpSolution:
    """Solve one LP; status is optimal, infeasible, or unbounded."""
    tol = tol or DEFAULT_TOLERANCES
    tab = _Tableau(lp, _signed_objective(lp.objective, lp.maximize), tol)
    status = tab.solve()
    if status != "optimal":
        return _empty_solution(lp, status, tab.iterations)
    x = tab.solution_x()
    _check_primal(lp, x, tol)
    reduced = np.zeros(lp.num_vars)
    d_row = getattr(tab, "d_row", None)
    if d_row is not None and tab.n_struct:
        r = d_row[:tab.n_struct] * tab.col_scale
        reduced[tab.keep_idx] = r if lp.maximize else -r
    return LpSolution("optimal", float(lp.objective @ x), x, tab.iterations,
                      reduced=reduced)


def solve_lexicographic(prog: LexicographicProgram,
                        tol: ToleranceConfig | None = None) -> LpSolution:
    """Optimize objective_1, pin it within eps_lex, then optimize objective_2.

    objective_value reports the stage-1 optimum; objective_value_2 the
    stage-2 value at the returned point.
    """
    tol = tol or DEFAULT_TOLERANCES
    base, o1, o2 = prog.base, prog.objective_1, prog.objective_2
    c1_max = _signed_objective(o1.coefficients, o1.maximize)
    tab = _Tableau(base, c1_max, tol)
    status = tab.solve()
    if status != "optimal":
        return _empty_solution(base, status, tab.iterations)
    x1 = tab.solution_x()
    opt1 = float(np.asarray(o1.coefficients) @ x1)
    slack = tol.eps_lex * max(1.0, abs(opt1))
    tab.append_level_constraint(c1_max, slack)

    c2_max = _signed_objective(o2.coefficients, o2.maximize)
    if tab._optimize(tab._embed(c2_max)) == "unbounded":
        value2 = np.inf if o2.maximize else -np.inf
        return LpSolution("optimal", opt1, x1, tab.iterations, objective_value_2=value2)
    x = tab.solution_x()
    _check_primal(base, x, tol)
    opt2 = float(np.asarray(o2.coefficients) @ x)
    return LpSolution("optimal", opt1, x, tab.iterations, objective_value_2=opt2)


def _most_fractional(x: np.ndarray, indices: tuple[int, ...]) -> tuple[int, float]:
    best_j, best_f = -1, -1.0
    for j in indices:
        f = abs(x[j] - round(x[j]))
        if f > best_f + 1e-15:
            best_f = f
            best_j = j
    return best_j, best_f


def solve_binary_bnb(prog: BinaryProgram, tol: ToleranceConfig | None = None,
                     node_limit: int = 100_000,
                     propagate: Callable[[int, float, np.ndarray, np.ndarray],
                                         None] | None = None) -> LpSolution:
    """Best-first branch and bound on the binary variables of stage 1.

    Branches on the most fractional binary. An initial depth-first dive
    rounds its way to a first incumbent so the best-first phase can prune
    early; with an incumbent known, binaries whose root reduced cost rules
    out the opposite value are pinned for the rest of the search. propagate,
    when given, receives every fixing (index, value, lower bounds, upper
    bounds) and may tighten other bounds in place. Once the stage-1 integer
    optimum is proven (or the node limit hits) both stages are reoptimized
    with the binaries fixed to the incumbent. bound carries the root
    relaxation value; proven is False when the node limit stopped the
    search early.
    """
    tol = tol or DEFAULT_TOLERANCES
    base = prog.lex.base
    o1 = prog.lex.objective_1
    idx = tuple(prog.binary_indices)
    for j in idx:
        if base.lb[j] != 0.0 or base.ub[j] != 1.0:
            raise ValueError(f"binary variable {j} must have bounds [0, 1]")
    sign = 1.0 if o1.maximize else -1.0

    def relax(lbn: np.ndarray, ubn: np.ndarray) -> LpSolution:
        lpn = LinearProgram(o1.coefficients, o1.maximize, base.a, base.relations,
                            base.b, lbn, ubn)
        return solve_lp(lpn, tol)

    def fix(lbn: np.ndarray, ubn: np.ndarray, j: int,
            val: float) -> tuple[np.ndarray, np.ndarray]:
        lbc, ubc = lbn.copy(), ubn.copy()
        lbc[j] = ubc[j] = val
        if propagate is not None:
            propagate(j, val, lbc, ubc)
        return lbc, ubc

    root = relax(base.lb, base.ub)
    if root.status != "optimal":
        return root
    root_bound = root.objective_value

    counter = 0
    heap: list = []
    incumbent: LpSolution | None = None
    inc_cmp = -np.inf
    nodes = 1
    iterations = root.iterations
    proven = True
    fixings: dict[int, float] = {}

    def apply_fixings(lbn: np.ndarray,
                      ubn: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
        # fold root-level pins into a popped node; None means the node's own
        # branching contradicts a pin, so its whole subtree is dominated
        out_lb, out_ub = lbn, ubn
        copied = False
        for j, val in fixings.items():
            if out_lb[j] > val or out_ub[j] < val:
                return None
            if out_lb[j] != val or out_ub[j] != val:
                if not copied:
                    out_lb, out_ub = out_lb.copy(), out_ub.copy()
                    copied = True
                out_lb[j] = out_ub[j] = val
                if propagate is not None:
                    propagate(j, val, out_lb, out_ub)
        return out_lb, out_ub

    def register_or_push(sol: LpSolution, depth: int, lbn: np.ndarray,
                         ubn: np.ndarray) -> None:
        # integral relaxations become incumbents right away, never heap entries
        nonlocal incumbent, inc_cmp, counter
        cmp_value = sign * sol.objective_value
        if incumbent is not None and cmp_value <= inc_cmp + 1e-12:
            return
        _, frac = _most_fractional(sol.x, idx)
        if frac <= tol.eps_int:
            incumbent, inc_cmp = sol, cmp_value
            return
        counter += 1
        heapq.heappush(heap, (-cmp_value, -depth, counter, sol, lbn, ubn))

    # dive: follow the rounding of the most fractional binary down the tree,
    # pushing each untaken sibling, until the path goes integral or dies
    cur_sol, cur_lb, cur_ub = root, base.lb, base.ub
    depth = 0
    while True:
        bj, frac = _most_fractional(cur_sol.x, idx)
        if frac <= tol.eps_int:
            cmp_value = sign * cur_sol.objective_value
            if incumbent is None or cmp_value > inc_cmp:
                incumbent, inc_cmp = cur_sol, cmp_value
            break
        if nodes + 2 > node_limit:
            proven = False
            break
        val = 1.0 if cur_sol.x[bj] >= 0.5 else 0.0
        slb, sub = fix(cur_lb, cur_ub, bj, 1.0 - val)
        sibling = relax(slb, sub)
        nodes += 1
        iterations += sibling.iterations
        if sibling.status == "optimal":
            register_or_push(sibling, depth + 1, slb, sub)
        clb, cub = fix(cur_lb, cur_ub, bj, val)
        child = relax(clb, cub)
        nodes += 1
        iterations += child.iterations
        if child.status != "optimal":
            break
        if incumbent is not None and \
                sign * child.objective_value <= inc_cmp + 1e-12:
            break
        cur_sol, cur_lb, cur_ub = child, clb, cub
        depth += 1

    # with an incumbent in hand, root reduced costs can pin binaries whose
    # opposite value provably cannot beat it; each pinning round shrinks the
    # root LP, which in turn may pin more
    cur_root, lb0, ub0 = root, base.lb, base.ub
    for _ in range(3):
        if incumbent is None or cur_root.reduced is None:
            break
        root_cmp = sign * cur_root.objective_value
        margin = 1e-6 * max(1.0, abs(inc_cmp))
        new_fix: list[tuple[int, float]] = []
        for j in idx:
            if j in fixings or lb0[j] == ub0[j]:
                continue
            d = sign * cur_root.reduced[j]
            if cur_root.x[j] <= tol.eps_int and root_cmp + d < inc_cmp - margin:
                new_fix.append((j, 0.0))
            elif cur_root.x[j] >= 1.0 - tol.eps_int and \
                    root_cmp - d < inc_cmp - margin:
                new_fix.append((j, 1.0))
        if not new_fix:
            break
        lb0, ub0 = lb0.copy(), ub0.copy()
        for j, val in new_fix:
            fixings[j] = val
            lb0[j] = ub0[j] = val
            if propagate is not None:
                propagate(j, val, lb0, ub0)
        resolved = relax(lb0, ub0)
        nodes += 1
        iterations += resolved.iterations
        if resolved.status != "optimal":
            break
        cur_root = resolved

    while heap:
        negb, negd, _, sol, lbn, ubn = heapq.heappop(heap)
        bound_cmp = -negb
        if incumbent is not None and \
                bound_cmp <= inc_cmp + tol.eps_opt * max(1.0, abs(inc_cmp)):
            break
        if nodes + 2 > node_limit:
            proven = False
            break
        if fixings:
            adjusted = apply_fixings(lbn, ubn)
            if adjusted is None:
                continue
            lbn, ubn = adjusted
        free = tuple(j for j in idx if lbn[j] < ubn[j])
        if not free:
            leaf = relax(lbn, ubn)
            nodes += 1
            iterations += leaf.iterations
            if leaf.status == "optimal":
                register_or_push(leaf, -negd + 1, lbn, ubn)
            continue
        bj, _ = _most_fractional(sol.x, free)
        for val in (0.0, 1.0):
            lbc, ubc = fix(lbn, ubn, bj, val)
            child = relax(lbc, ubc)
            nodes += 1
            iterations += child.iterations
            if child.status == "optimal":
                register_or_push(child, -negd + 1, lbc, ubc)
    if incumbent is None:
        if proven:
            return LpSolution("infeasible", np.nan, np.full(base.num_vars, np.nan),
                              iterations, bound=root_bound, nodes=nodes)
        raise NumericalError("node limit exhausted before any integer solution")

    lbf, ubf = base.lb.copy(), base.ub.copy()
    for j in idx:
        val = float(round(incumbent.x[j]))
        lbf[j] = ubf[j] = val
        if propagate is not None:
            propagate(j, val, lbf, ubf)
    fixed = LexicographicProgram(
        LinearProgram(base.objective, base.maximize, base.a, base.relations,
                      base.b, lbf, ubf),
        prog.lex.objective_1, prog.lex.objective_2)
    final = solve_lexicographic(fixed, tol)
    if final.status != "optimal":
        raise NumericalError("incumbent assignment failed to resolve")
    return LpSolution("optimal", final.objective_value, final.x,
                      iterations + final.iterations,
                      objective_value_2=final.objective_value_2,
                      bound=root_bound, proven=proven, nodes=nodes)
