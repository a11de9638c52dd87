"""Constrained minimisation of the energy by projected gradient descent.

Each iteration takes an explicit L2-gradient step from the current
constrained point and maps the result back onto the constraint:

* nodal:  w -> alpha w+ + beta w-  (pair projection, nodal Nehari set)
* ground: w -> t w                  (scalar projection, Nehari manifold)

The projected energy is the max of the energy over the projection fibre,
so its derivative at a constrained point is the plain energy derivative and
the step is a descent step for it; the step length is controlled by
backtracking on the projected energy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .discretization import Field, values_of
from .errors import MaxIters, PartCollapse
from .functional import (
    Problem,
    _residual_values,
    energy,
    pairing,
)
from .nehari import NehariPair, pair_project, scalar_project

log = logging.getLogger(__name__)

SEED_KINDS = ("odd-bump", "gaussian", "table")


@dataclass
class SolverConfig:
    step_size: float = 1e-2
    max_iters: int = 200_000
    residual_tol: float = 1e-8
    pair_tol: float = 1e-8
    seed_kind: str | None = None
    rng_seed: int = 0
    seed_jitter: float = 0.0
    seed_values: np.ndarray | None = None
    shrink: float = 0.5
    grow: float = 1.1
    max_backtracks: int = 30
    projection_tol: float = 1e-14
    trace_every: int = 100
    trace_path: str | Path | None = None

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.seed_kind is not None and self.seed_kind not in SEED_KINDS:
            raise ValueError(f"unknown seed kind {self.seed_kind!r}")
        if self.seed_kind == "table" and self.seed_values is None:
            raise ValueError("seed_kind='table' needs seed_values")


@dataclass
class SolveResult:
    field: Field
    level: float
    residual_inf: float
    iters: int
    trace: list[tuple[int, float, float]]
    pair_at_end: NehariPair | float
    energies: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    converged: bool = True


def make_seed(problem: Problem, cfg: SolverConfig, kind: str) -> np.ndarray:
    """Initial field; ``seed_jitter`` > 0 draws a random member of the family."""
    kind = cfg.seed_kind or kind
    if kind == "table":
        return values_of(cfg.seed_values, problem.grid).copy()
    x = problem.grid.nodes
    X = x[:, None] if x.ndim == 1 else x
    amp, width, shift = 1.0, 1.0, np.zeros(X.shape[1])
    if cfg.seed_jitter > 0:
        rng = np.random.default_rng(cfg.rng_seed)
        j = cfg.seed_jitter
        amp = np.exp(j * rng.standard_normal())
        width = np.exp(j * rng.standard_normal())
        shift = j * rng.standard_normal(X.shape[1])
    if kind == "odd-bump":
        Y = (X - shift) / width
        return Y[:, 0] * amp * np.exp(-0.5 * np.sum(Y**2, axis=1))
    if kind == "gaussian":
        # centre on the node nearest the origin: a bump centred between two
        # cells is a lattice saddle that exact symmetry would never leave
        centre = X[np.argmin(np.sum(X**2, axis=1))]
        Y = (X - centre - shift) / width
        return amp * np.exp(-0.5 * np.sum(Y**2, axis=1))
    raise ValueError(f"unknown seed kind {kind!r}")


class _Trace:
    def __init__(self, every: int, path):
        self.every = max(1, int(every))
        self.samples: list[tuple[int, float, float]] = []
        self._fh = open(path, "w") if path else None

    def record(self, it: int, J: float, res: float, force: bool = False):
        if force or it % self.every == 0:
            if self.samples and self.samples[-1][0] == it:
                return
            self.samples.append((it, J, res))
            if self._fh:
                self._fh.write(f"{it} {J:.17g} {res:.17g}\n")

    def close(self):
        if self._fh:
            self._fh.close()


def _energy_scale(problem: Problem, v: np.ndarray) -> float:
    """Sum of magnitudes of the energy terms; sets the roundoff floor of I."""
    G = 2.0 * float(v @ problem.kernel.apply(v))
    w = problem.w
    return (
        0.5 * problem.a * G
        + 0.25 * problem.b * G * G
        + w * (0.5 * float(np.sum(problem.V * v * v)) + float(np.sum(np.abs(v) ** problem.p)) / problem.p)
    )


def _descend(
    problem: Problem,
    cfg: SolverConfig,
    w0: np.ndarray,
    project: Callable[[np.ndarray], tuple[np.ndarray, object, float]],
    collapse_check: Callable[[np.ndarray], None] | None,
) -> SolveResult:
    """Shared projected-gradient loop.

    ``project(w)`` returns (v, info, distance of the projection from identity).
    """
    w = problem.w
    v, info, dist = project(w0)
    J = energy(problem, v)
    r = _residual_values(problem, v)
    res = float(np.max(np.abs(r)))
    r2 = w * float(r @ r)
    G0 = 2.0 * float(v @ problem.kernel.apply(v))
    tau = cfg.step_size / (problem.a + problem.b * G0)
    noise = 64 * np.finfo(float).eps * _energy_scale(problem, v)

    energies = [J]
    trace = _Trace(cfg.trace_every, cfg.trace_path)
    trace.record(0, J, res, force=True)
    it = 0
    try:
        while True:
            if res <= cfg.residual_tol and dist <= cfg.pair_tol:
                break
            if it >= cfg.max_iters:
                trace.record(it, J, res, force=True)
                result = SolveResult(problem.field(v), J, res, it, trace.samples, info,
                                     np.asarray(energies), converged=False)
                err = MaxIters(f"no convergence in {cfg.max_iters} iterations "
                               f"(residual {res:.3e}, projection offset {dist:.3e})")
                err.result = result
                raise err
            it += 1
            for _ in range(cfg.max_backtracks):
                w_new = v - tau * r
                if collapse_check is not None:
                    collapse_check(w_new)
                v_new, info_new, dist_new = project(w_new)
                J_new = energy(problem, v_new)
                pred = tau * r2
                if pred > noise:
                    if J_new <= J - 1e-4 * pred:
                        r_new = _residual_values(problem, v_new)
                        break
                elif J_new <= J + noise:
                    # energy differences are below roundoff; estimate the change
                    # by the trapezoid rule on the directional derivatives,
                    # dJ ~ -(tau/2) <r + r_new, r>, exact for quadratics
                    r_new = _residual_values(problem, v_new)
                    if -0.5 * tau * (r2 + w * float(r_new @ r)) <= -1e-4 * pred:
                        break
                tau *= cfg.shrink
            else:
                trace.record(it, J, res, force=True)
                err = MaxIters(f"backtracking failed at iteration {it} (step {tau:.3e})")
                err.result = SolveResult(problem.field(v), J, res, it, trace.samples, info,
                                         np.asarray(energies), converged=False)
                raise err
            v, info, dist, J, r = v_new, info_new, dist_new, J_new, r_new
            res = float(np.max(np.abs(r)))
            r2 = w * float(r @ r)
            energies.append(J)
            trace.record(it, J, res)
            tau *= cfg.grow
        trace.record(it, J, res, force=True)
    finally:
        trace.close()
    log.debug("converged in %d iterations, level %.12g, residual %.3e", it, J, res)
    return SolveResult(problem.field(v), J, res, it, trace.samples, info, np.asarray(energies))


def minimize_nodal(problem: Problem, cfg: SolverConfig | None = None) -> SolveResult:
    """Least-energy point of the nodal Nehari set.

    Raises PartCollapse if an iterate loses its positive or negative part and
    MaxIters if the budget runs out (the partial result is attached as
    ``exc.result``).
    """
    cfg = cfg or SolverConfig()
    seed = make_seed(problem, cfg, "odd-bump")
    guess = [None]

    def project(wv):
        pair = pair_project(problem, wv, tol=cfg.projection_tol, guess=guess[0])
        guess[0] = (1.0, 1.0)
        v = pair.alpha * np.maximum(wv, 0.0) + pair.beta * np.minimum(wv, 0.0)
        return v, pair, pair.distance_to_unit()

    def collapse(wv):
        tot = float(wv @ wv)
        part = min(float(np.sum(np.maximum(wv, 0.0) ** 2)), float(np.sum(np.minimum(wv, 0.0) ** 2)))
        if not tot > 0 or part < 1e-14 * tot:
            raise PartCollapse("iterate left the sign-changing cone")

    collapse(seed)
    return _descend(problem, cfg, seed, project, collapse)


def minimize_ground(problem: Problem, cfg: SolverConfig | None = None,
                    projector: Callable[[Problem, np.ndarray], float] | None = None) -> SolveResult:
    """Least-energy point of the Nehari manifold.

    ``projector`` replaces :func:`scalar_project` (e.g. the b = 0 closed form).
    """
    cfg = cfg or SolverConfig()
    seed = make_seed(problem, cfg, "gaussian")
    if not np.any(seed):
        raise ValueError("ground-state seed must not vanish")
    projector = projector or (lambda pr, wv: scalar_project(pr, wv))

    def project(wv):
        t = projector(problem, wv)
        return t * wv, t, abs(t - 1.0)

    return _descend(problem, cfg, seed, project, None)


@dataclass
class CriticalReport:
    residual_inf: float
    pairing_plus: float
    pairing_minus: float
    sign_changes: int
    nontrivial: bool
    tol: float

    @property
    def residual_ok(self) -> bool:
        return self.residual_inf <= self.tol

    @property
    def passed(self) -> bool:
        return (
            self.residual_ok
            and abs(self.pairing_plus) <= self.tol
            and abs(self.pairing_minus) <= self.tol
            and self.nontrivial
        )


def _sign_changes(values: np.ndarray, floor: float) -> int:
    """Sign changes along the node ordering, ignoring |u| <= floor."""
    sig = np.sign(values[np.abs(values) > floor])
    return int(np.count_nonzero(sig[1:] != sig[:-1]))


def verify_critical(problem: Problem, u, tol: float = 1e-8) -> CriticalReport:
    """Residual, half pairings and sign structure of a candidate solution.

    The half pairings are compared against ``tol`` times the cell measure
    scale of the residual, i.e. |<I'(u), u+->| <= tol * int |u+-|.
    """
    uv = values_of(u, problem.grid)
    r = _residual_values(problem, uv)
    up = np.maximum(uv, 0.0)
    um = np.minimum(uv, 0.0)
    # |<I'(u), u+>| = |w sum r u+| <= max|r| * int|u+|, so normalise by int|u+|
    wp = problem.w * float(np.sum(up))
    wm = -problem.w * float(np.sum(um))
    pp = pairing(problem, uv, up) / wp if wp > 0 else 0.0
    pm = pairing(problem, uv, um) / wm if wm > 0 else 0.0
    floor = 1e-8 * float(np.max(np.abs(uv))) if np.any(uv) else 0.0
    return CriticalReport(
        residual_inf=float(np.max(np.abs(r))),
        pairing_plus=pp,
        pairing_minus=pm,
        sign_changes=_sign_changes(uv, floor) if problem.grid.dim == 1 else _sign_changes_nd(uv),
        nontrivial=bool(np.any(uv)),
        tol=tol,
    )


def _sign_changes_nd(values: np.ndarray) -> int:
    """In dim >= 2 only report whether both signs are present (0 or 1)."""
    return int(np.any(values > 0) and np.any(values < 0))
