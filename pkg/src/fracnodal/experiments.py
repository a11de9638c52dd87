"""Energy doubling, b -> 0 continuation and grid studies, plus CSV reports."""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .discretization import Grid
from .functional import Problem, energy, h_norm_sq
from .model import ModelParams, NonlinearitySpec, PotentialSpec, config_dict
from .nehari import pair_project, scalar_project
from .solver import SolveResult, SolverConfig, make_seed, minimize_ground, minimize_nodal

CSV_HEADER = ("b", "c_nod", "c_ground", "ratio", "margin", "iters_nodal", "iters_ground", "dist_to_limit")

DEFAULT_B_VALUES = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0)


@dataclass(frozen=True)
class ChainCheck:
    """Numerical chain 2c <= I(t+ u+) + I(t- u-) <= I(t+ u+ + t- u-) <= I(u)."""

    t_plus: float
    t_minus: float
    two_c_ground: float
    split: float
    joint: float
    nodal: float
    tol: float

    @property
    def holds(self) -> bool:
        return (
            self.two_c_ground <= self.split + self.tol
            and self.split <= self.joint + self.tol
            and self.joint <= self.nodal + self.tol
        )


@dataclass
class DoublingRecord:
    b: float
    c_nod: float
    c_ground: float
    ratio: float
    margin: float
    iters_nodal: int
    iters_ground: int
    dist_to_limit: float = math.nan
    pair_alpha: float = math.nan
    pair_beta: float = math.nan
    anomaly: bool = False
    seed_source: str = "default"
    chain: ChainCheck | None = None
    ground_symmetry_gap: float | None = None

    @classmethod
    def from_levels(cls, b, c_nod, c_ground, iters_nodal, iters_ground, **extra) -> "DoublingRecord":
        return cls(b, c_nod, c_ground, c_nod / c_ground, c_nod - 2.0 * c_ground,
                   int(iters_nodal), int(iters_ground), **extra)

    def csv_row(self) -> list[str]:
        return [
            f"{self.b:.17g}", f"{self.c_nod:.17g}", f"{self.c_ground:.17g}", f"{self.ratio:.17g}",
            f"{self.margin:.17g}", str(self.iters_nodal), str(self.iters_ground), f"{self.dist_to_limit:.17g}",
        ]


class SweepEntry(NamedTuple):
    b: float
    record: DoublingRecord
    distance_to_limit: float


@dataclass
class SweepConfig:
    b_values: Sequence[float] = DEFAULT_B_VALUES
    base: ModelParams = field(default_factory=ModelParams)
    warm_start: bool = True
    restarts: bool = True

    def __post_init__(self):
        bs = [float(b) for b in self.b_values]
        if not bs:
            raise ValueError("b_values must not be empty")
        if any(b2 >= b1 for b1, b2 in zip(bs, bs[1:])):
            raise ValueError("b_values must be strictly decreasing")
        if bs[-1] < 0:
            raise ValueError("b_values must be nonnegative")
        self.b_values = tuple(bs)


def _problem(mp, pot, nl) -> Problem:
    return Problem.build(mp, pot, nl or NonlinearitySpec(p=mp.p))


def chain_check(problem: Problem, u: np.ndarray, c_nodal: float, c_ground: float, tol: float) -> ChainCheck:
    up = np.maximum(u, 0.0)
    um = np.minimum(u, 0.0)
    tp = float(scalar_project(problem, up))
    tm = float(scalar_project(problem, um))
    split = energy(problem, tp * up) + energy(problem, tm * um)
    joint = energy(problem, tp * up + tm * um)
    return ChainCheck(tp, tm, 2.0 * c_ground, split, joint, c_nodal, tol)


def _with_seed(cfg: SolverConfig, values) -> SolverConfig:
    return replace(cfg, seed_kind="table", seed_values=np.asarray(values, dtype=float))


def run_energy_doubling(
    mp: ModelParams | None = None,
    cfg: SolverConfig | None = None,
    pot: PotentialSpec | None = None,
    nl: NonlinearitySpec | None = None,
    *,
    problem: Problem | None = None,
    symmetry_check: bool = True,
    nodal_seed=None,
    ground_seed=None,
) -> DoublingRecord:
    """Nodal and ground solves at one parameter set, with the chain check.

    With ``symmetry_check`` the ground state is recomputed from the negated
    seed; the relative level difference is stored in ``ground_symmetry_gap``.
    """
    mp = mp or ModelParams()
    cfg = cfg or SolverConfig()
    pr = problem or _problem(mp, pot or PotentialSpec(), nl)
    nod = minimize_nodal(pr, cfg if nodal_seed is None else _with_seed(cfg, nodal_seed))
    gcfg = cfg if ground_seed is None else _with_seed(cfg, ground_seed)
    gnd = minimize_ground(pr, gcfg)
    gap = None
    if symmetry_check:
        neg = minimize_ground(pr, _with_seed(cfg, -make_seed(pr, gcfg, "gaussian")))
        gap = abs(neg.level - gnd.level) / abs(gnd.level)
    chain = chain_check(pr, nod.field.values, nod.level, gnd.level, 10 * cfg.residual_tol)
    return DoublingRecord.from_levels(pr.b, nod.level, gnd.level, nod.iters, gnd.iters,
                                      chain=chain, ground_symmetry_gap=gap)


def run_b_sweep(
    sweep: SweepConfig | None = None,
    cfg: SolverConfig | None = None,
    pot: PotentialSpec | None = None,
    nl: NonlinearitySpec | None = None,
) -> list[SweepEntry]:
    """Nodal and ground solves along the b sequence, compared with the b = 0 limit.

    With ``warm_start`` each b_n is seeded with the previous minimiser; with
    ``restarts`` as well, it is also solved from the default seed and the
    lower level is kept (the record notes which start won), because the
    warm-started branch need not stay the least-energy one.  For each b_n the
    record holds the levels, d_n = ||u_{b_n} - u_0||_H and the pair projection
    at b_n of the limit solution u_0.  A distance that grows along the
    sequence sets ``anomaly`` on that record (a possible branch switch)
    instead of raising.
    """
    sweep = sweep or SweepConfig()
    cfg = cfg or SolverConfig()
    if sweep.b_values[-1] != 0.0:
        raise ValueError("the sweep must end at b = 0 to define the limit problem")
    base = _problem(sweep.base, pot or PotentialSpec(), nl)
    solves: list[tuple[float, SolveResult, SolveResult, str]] = []
    prev_nod = prev_gnd = None
    for b in sweep.b_values:
        pr = base.with_b(b)
        nod, source = None, "default"
        if prev_nod is not None:
            nod, source = minimize_nodal(pr, _with_seed(cfg, prev_nod)), "warm"
        if nod is None or sweep.restarts:
            cold = minimize_nodal(pr, cfg)
            if nod is None or cold.level < nod.level:
                nod, source = cold, "default"
        gnd = None
        if prev_gnd is not None:
            gnd = minimize_ground(pr, _with_seed(cfg, prev_gnd))
        if gnd is None or sweep.restarts:
            cold = minimize_ground(pr, cfg)
            if gnd is None or cold.level < gnd.level:
                gnd = cold
        solves.append((b, nod, gnd, source))
        if sweep.warm_start:
            prev_nod, prev_gnd = nod.field.values, gnd.field.values

    u0 = solves[-1][1].field.values
    entries: list[SweepEntry] = []
    last = math.inf
    for b, nod, gnd, source in solves:
        d = math.sqrt(max(h_norm_sq(base, nod.field.values - u0), 0.0))
        pair = pair_project(base.with_b(b), u0)
        rec = DoublingRecord.from_levels(b, nod.level, gnd.level, nod.iters, gnd.iters,
                                         dist_to_limit=d, pair_alpha=pair.alpha, pair_beta=pair.beta,
                                         anomaly=d > last, seed_source=source)
        last = d
        entries.append(SweepEntry(b, rec, d))
    return entries


# -- grid study ---------------------------------------------------------------


@dataclass(frozen=True)
class GridLevel:
    grid_points: int
    level: float
    iters: int
    residual_inf: float
    source: str


def transfer(values: np.ndarray, src: Grid, dst: Grid) -> np.ndarray:
    """Linear interpolation of a 1D grid function, zero outside the box."""
    if src.dim != 1 or dst.dim != 1:
        raise ValueError("grid transfer is implemented in 1D only")
    return np.interp(dst.axis, src.axis, values, left=0.0, right=0.0)


def run_grid_study(
    mp: ModelParams | None = None,
    grid_points: Sequence[int] = (128, 256, 512),
    cfg: SolverConfig | None = None,
    pot: PotentialSpec | None = None,
    nl: NonlinearitySpec | None = None,
    cross_seed: bool = True,
) -> list[GridLevel]:
    """Nodal level on several grids.

    Each grid is solved from the default seed; with ``cross_seed`` it is also
    solved from every other grid's converged field (interpolated) and the
    lowest converged level is kept, since the nodal level is an infimum and
    coarse grids admit spurious lattice-pinned minimisers.
    """
    mp = mp or ModelParams()
    cfg = cfg or SolverConfig()
    problems = {M: _problem(mp.replace(grid_points=M), pot or PotentialSpec(), nl) for M in grid_points}
    best: dict[int, GridLevel] = {}
    fields: dict[int, np.ndarray] = {}
    for M, pr in problems.items():
        r = minimize_nodal(pr, cfg)
        best[M] = GridLevel(M, r.level, r.iters, r.residual_inf, "default")
        fields[M] = r.field.values
    if cross_seed and mp.dim == 1:
        seeds = dict(fields)
        for M, pr in problems.items():
            for M2, v in seeds.items():
                if M2 == M:
                    continue
                r = minimize_nodal(pr, _with_seed(cfg, transfer(v, problems[M2].grid, pr.grid)))
                if r.level < best[M].level:
                    best[M] = GridLevel(M, r.level, r.iters, r.residual_inf, f"from M={M2}")
    return [best[M] for M in grid_points]


def cauchy_looking(levels: Sequence[float]) -> bool:
    """Successive differences strictly shrink."""
    diffs = [abs(b - a) for a, b in zip(levels, levels[1:])]
    return all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))


# -- reports ------------------------------------------------------------------


class ReportError(OSError):
    pass


def _record_of(item) -> DoublingRecord:
    return item.record if isinstance(item, SweepEntry) else item


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def environment_stamp() -> dict:
    from . import __version__

    return {
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def emit_report(records, path, config: dict | None = None) -> Path:
    """Write the CSV table and a JSON sidecar (same stem, ``.json``)."""
    recs = [_record_of(r) for r in records]
    if not recs:
        raise ValueError("emit_report needs at least one record")
    path = Path(path)
    side = path.with_suffix(".json")
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CSV_HEADER)
            for r in recs:
                wr.writerow(r.csv_row())
        payload = {
            "config": _jsonable(config or {}),
            "environment": environment_stamp(),
            "records": [_jsonable(asdict(r)) for r in recs],
        }
        side.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc.strerror or exc}") from exc
    return path


def read_report(path) -> list[dict]:
    """Parse an emitted CSV back into dicts of floats (iteration counts as int)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({k: int(v) if k.startswith("iters") else float(v) for k, v in row.items()})
    return out


def run_config(mp: ModelParams, pot: PotentialSpec, nl: NonlinearitySpec, cfg: SolverConfig) -> dict:
    """Config block for the JSON sidecar."""
    solver = {k: v for k, v in asdict(cfg).items() if k not in ("seed_values",)}
    solver["trace_path"] = str(solver["trace_path"]) if solver["trace_path"] else None
    return {"model": config_dict(mp, pot, nl), "solver": solver}
