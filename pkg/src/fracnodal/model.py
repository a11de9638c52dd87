"""Problem data for the fractional Kirchhoff equation and admissibility checks.

The equation solved throughout the package is

    (a + b [u]^2) (-Delta)^s u + V(x) u = f(u)   in R^N,

with [u]^2 the Gagliardo energy, V a confining potential bounded below by
V0 > 0 and f(u) = |u|^(p-2) u a pure power with 4 < p < 2*_s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

POTENTIAL_KINDS = ("constant", "harmonic", "custom-table")
NONLINEARITY_KINDS = ("pure-power",)


@dataclass(frozen=True)
class ModelParams:
    a: float = 1.0
    b: float = 1.0
    s: float = 0.5
    dim: int = 1
    p: float = 6.0
    half_width: float = 20.0
    grid_points: int = 512

    @property
    def critical_exponent(self) -> float:
        """Fractional Sobolev exponent 2N/(N-2s), infinite when N <= 2s."""
        if self.dim <= 2 * self.s:
            return math.inf
        return 2 * self.dim / (self.dim - 2 * self.s)

    def replace(self, **changes: Any) -> "ModelParams":
        values = {**self.__dict__, **changes}
        return ModelParams(**values)


@dataclass(frozen=True)
class PotentialSpec:
    """Potential V(x).

    ``constant``:      V = v0
    ``harmonic``:      V = v0 + curvature * |x|^2
    ``custom-table``:  V(x) interpolated from ``table`` = ((r0, V0), (r1, V1), ...)
                       as a function of r = |x|, held constant beyond the ends.
    """

    kind: str = "harmonic"
    v0: float = 1.0
    curvature: float = 1.0
    table: tuple[tuple[float, float], ...] | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            r2 = x**2
        else:
            r2 = np.sum(x**2, axis=-1)
        if self.kind == "constant":
            return np.full(r2.shape, float(self.v0))
        if self.kind == "harmonic":
            return self.v0 + self.curvature * r2
        if self.kind == "custom-table":
            if not self.table:
                raise ValueError("custom-table potential needs a non-empty table")
            rs, vs = np.asarray(self.table, dtype=float).T
            return np.interp(np.sqrt(r2), rs, vs)
        raise ValueError(f"unknown potential kind {self.kind!r}")

    @property
    def coercive(self) -> bool:
        if self.kind == "harmonic":
            return self.curvature > 0
        if self.kind == "custom-table" and self.table:
            # Only the sampled trend can be inspected; a table that ends at its
            # maximum is treated as growing.
            vs = [v for _, v in self.table]
            return len(vs) > 1 and vs[-1] == max(vs) and vs[-1] > vs[0]
        return False


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = "pure-power"
    p: float = 6.0

    def f(self, u):
        return f_eval(self, u)

    def F(self, u):
        return F_eval(self, u)

    def H(self, u):
        """u f(u) - 4 F(u) = (1 - 4/p) |u|^p."""
        return (1.0 - 4.0 / self.p) * np.abs(u) ** self.p


def f_eval(nl: NonlinearitySpec, u_val):
    """f(u) = |u|^(p-2) u, odd and of the sign of u."""
    u = np.asarray(u_val, dtype=float)
    out = np.abs(u) ** (nl.p - 2.0) * u
    return out if out.ndim else float(out)


def F_eval(nl: NonlinearitySpec, u_val):
    """Primitive F(u) = |u|^p / p."""
    u = np.asarray(u_val, dtype=float)
    out = np.abs(u) ** nl.p / nl.p
    return out if out.ndim else float(out)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            lines = ["valid"]
        else:
            lines = [f"violation: {v}" for v in self.violations]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def validate_params(
    mp: ModelParams, pot: PotentialSpec, nl: NonlinearitySpec
) -> ValidationReport:
    """Collect every violated hypothesis instead of stopping at the first."""
    rep = ValidationReport()
    v = rep.violations

    if not mp.a > 0:
        v.append(f"a must be positive (a={mp.a})")
    if not mp.b >= 0:
        v.append(f"b must be nonnegative (b={mp.b})")
    if not 0 < mp.s < 1:
        v.append(f"s must lie in (0, 1) (s={mp.s})")
    if int(mp.dim) != mp.dim or mp.dim < 1:
        v.append(f"dim must be a positive integer (dim={mp.dim})")
    if not mp.half_width > 0:
        v.append(f"half_width must be positive (L={mp.half_width})")
    if int(mp.grid_points) != mp.grid_points or mp.grid_points < 4:
        v.append(f"grid_points must be an integer >= 4 (M={mp.grid_points})")

    if nl.kind not in NONLINEARITY_KINDS:
        v.append(f"unsupported nonlinearity kind {nl.kind!r}")
    if nl.p != mp.p:
        v.append(f"nonlinearity exponent {nl.p} differs from model exponent {mp.p}")
    if not mp.p > 4:
        v.append(f"p must exceed 4 (p={mp.p})")
    if 0 < mp.s < 1 and mp.dim >= 1:
        crit = mp.critical_exponent
        if not mp.p < crit:
            v.append(f"p={mp.p} must be below the critical exponent {crit:g}")

    if pot.kind not in POTENTIAL_KINDS:
        v.append(f"unknown potential kind {pot.kind!r}")
    elif not pot.v0 > 0:
        v.append(f"V0 must be positive (V0={pot.v0})")
    else:
        try:
            vmin = _grid_minimum(mp, pot)
        except ValueError as exc:
            v.append(f"potential cannot be evaluated: {exc}")
        else:
            if not vmin >= pot.v0:
                v.append(f"min V on grid is {vmin:g} < V0={pot.v0:g}")
        if pot.kind == "harmonic" and not pot.curvature > 0:
            v.append("harmonic potential needs positive curvature")

    if pot.kind in POTENTIAL_KINDS and not pot.coercive:
        rep.notes.append(
            "potential not certified coercive at infinity: only coercive potentials are checked; "
            "the truncated box supplies compactness regardless"
        )
    return rep


def _grid_minimum(mp: ModelParams, pot: PotentialSpec) -> float:
    """Minimum of V over the radii spanned by the grid nodes.

    Every supported potential is radial and piecewise monotone in r, so the
    end radii plus the table breakpoints in between suffice; this never
    materialises the M^dim nodes.
    """
    from .discretization import make_grid

    if int(mp.grid_points) != mp.grid_points or mp.grid_points < 4 or not mp.half_width > 0:
        raise ValueError("grid parameters invalid")
    ax = make_grid(mp).axis
    r_lo = math.sqrt(mp.dim) * float(np.min(np.abs(ax)))
    r_hi = math.sqrt(mp.dim) * float(np.max(np.abs(ax)))
    radii = [r_lo, r_hi]
    if pot.kind == "custom-table" and pot.table:
        radii += [r for r, _ in pot.table if r_lo < r < r_hi]
    return float(np.min(pot(np.asarray(radii))))


def load_config(source: str | Path | Mapping[str, Any]):
    """Read ``(ModelParams, PotentialSpec, NonlinearitySpec)`` from JSON.

    Keys: a, b, s, dim, p, half_width, grid_points,
    potential: {kind, v0, [curvature], [table]}, nonlinearity: {kind}.
    Missing keys fall back to the defaults.
    """
    if isinstance(source, Mapping):
        cfg = dict(source)
    else:
        cfg = json.loads(Path(source).read_text())

    known = {"a", "b", "s", "dim", "p", "half_width", "grid_points", "potential", "nonlinearity"}
    unknown = set(cfg) - known
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")

    mp_kwargs = {k: cfg[k] for k in ("a", "b", "s", "dim", "p", "half_width", "grid_points") if k in cfg}
    for k in ("dim", "grid_points"):
        if k in mp_kwargs:
            mp_kwargs[k] = int(mp_kwargs[k])
    mp = ModelParams(**mp_kwargs)

    pot_cfg = dict(cfg.get("potential", {}))
    table = pot_cfg.get("table")
    pot = PotentialSpec(
        kind=pot_cfg.get("kind", "harmonic"),
        v0=float(pot_cfg.get("v0", 1.0)),
        curvature=float(pot_cfg.get("curvature", 1.0)),
        table=tuple(tuple(map(float, row)) for row in table) if table else None,
    )
    nl_cfg = dict(cfg.get("nonlinearity", {}))
    nl = NonlinearitySpec(kind=nl_cfg.get("kind", "pure-power"), p=mp.p)
    return mp, pot, nl


def config_dict(mp: ModelParams, pot: PotentialSpec, nl: NonlinearitySpec) -> dict:
    """Inverse of :func:`load_config`."""
    out: dict[str, Any] = {
        "a": mp.a,
        "b": mp.b,
        "s": mp.s,
        "dim": mp.dim,
        "p": mp.p,
        "half_width": mp.half_width,
        "grid_points": mp.grid_points,
        "potential": {"kind": pot.kind, "v0": pot.v0},
        "nonlinearity": {"kind": nl.kind},
    }
    if pot.kind == "harmonic":
        out["potential"]["curvature"] = pot.curvature
    if pot.table:
        out["potential"]["table"] = [list(row) for row in pot.table]
    return out
