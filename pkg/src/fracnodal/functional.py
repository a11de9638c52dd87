"""Kirchhoff energy, its derivative and the sign-split component quantities.

Notation on a field u with G(u) the Gagliardo energy:

    I(u)      = a/2 G + b/4 G^2 + 1/2 int V u^2 - int F(u)
    <I'(u),v> = (a + b G) <u, v>_G + int V u v - int f(u) v

and for the split u = u+ + u-:

    A+- = G(u+-),  B+- = int V (u+-)^2,  C = <u+, u->_G  (> 0),
    G(u) = A+ + 2 C + A-.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import (
    Field,
    Grid,
    KernelMatrix,
    build_kernel,
    make_grid,
    values_of,
)
from .model import ModelParams, NonlinearitySpec, PotentialSpec


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything needed to evaluate the energy on one grid.

    The kernel is the expensive part; :meth:`with_b` and :meth:`with_params`
    reuse it when only the coefficients change.
    """

    params: ModelParams
    potential: PotentialSpec
    nonlinearity: NonlinearitySpec
    grid: Grid
    kernel: KernelMatrix
    V: np.ndarray

    @classmethod
    def build(
        cls,
        mp: ModelParams | None = None,
        pot: PotentialSpec | None = None,
        nl: NonlinearitySpec | None = None,
        tail: bool = True,
    ) -> "Problem":
        mp = mp or ModelParams()
        pot = pot or PotentialSpec()
        nl = nl or NonlinearitySpec(p=mp.p)
        grid = make_grid(mp)
        kernel = build_kernel(grid, mp.s, tail=tail)
        V = np.asarray(pot(grid.nodes), dtype=float)
        return cls(mp, pot, nl, grid, kernel, V)

    def with_b(self, b: float) -> "Problem":
        return self.with_params(b=b)

    def with_params(self, **changes) -> "Problem":
        """Same grid, kernel and potential; only a, b or p may change."""
        if set(changes) - {"a", "b", "p"}:
            raise ValueError("only a, b and p can change without rebuilding the kernel")
        mp = self.params.replace(**changes)
        nl = NonlinearitySpec(self.nonlinearity.kind, mp.p)
        return Problem(mp, self.potential, nl, self.grid, self.kernel, self.V)

    @property
    def a(self) -> float:
        return self.params.a

    @property
    def b(self) -> float:
        return self.params.b

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def w(self) -> float:
        return self.grid.cell_measure

    def field(self, values) -> Field:
        return Field(self.grid, values)


@dataclass(frozen=True)
class EnergyBreakdown:
    a_plus: float
    a_minus: float
    b_plus: float
    b_minus: float
    cross: float
    nl_plus: float
    nl_minus: float
    fdot_plus: float
    fdot_minus: float

    @property
    def gagliardo(self) -> float:
        return self.a_plus + 2.0 * self.cross + self.a_minus


def _pow(u: np.ndarray, p: float) -> np.ndarray:
    return np.abs(u) ** p


def gagliardo_energy(problem: Problem, u) -> float:
    uv = values_of(u, problem.grid)
    return 2.0 * float(uv @ problem.kernel.apply(uv))


def h_norm_sq(problem: Problem, u) -> float:
    uv = values_of(u, problem.grid)
    return gagliardo_energy(problem, uv) + problem.w * float(np.sum(problem.V * uv * uv)) / problem.a


def components(problem: Problem, u) -> EnergyBreakdown:
    uv = values_of(u, problem.grid)
    up = np.maximum(uv, 0.0)
    um = np.minimum(uv, 0.0)
    k = problem.kernel
    Qp = k.apply(up)
    Qm = k.apply(um)
    w, p, V = problem.w, problem.p, problem.V
    Pp = _pow(up, p)
    Pm = _pow(um, p)
    return EnergyBreakdown(
        a_plus=2.0 * float(up @ Qp),
        a_minus=2.0 * float(um @ Qm),
        b_plus=w * float(np.sum(V * up * up)),
        b_minus=w * float(np.sum(V * um * um)),
        # diag(D+T) contributes nothing because up * um == 0
        cross=2.0 * float(up @ Qm),
        nl_plus=w * float(np.sum(Pp)) / p,
        nl_minus=w * float(np.sum(Pm)) / p,
        fdot_plus=w * float(np.sum(Pp)),
        fdot_minus=w * float(np.sum(Pm)),
    )


def energy(problem: Problem, u) -> float:
    uv = values_of(u, problem.grid)
    a, b, p, w = problem.a, problem.b, problem.p, problem.w
    G = 2.0 * float(uv @ problem.kernel.apply(uv))
    return 0.5 * a * G + 0.25 * b * G * G + w * (
        0.5 * float(np.sum(problem.V * uv * uv)) - float(np.sum(_pow(uv, p))) / p
    )


def energy_from_components(problem: Problem, eb: EnergyBreakdown, alpha: float = 1.0, beta: float = 1.0) -> float:
    """phi(alpha, beta) = I(alpha u+ + beta u-) from the components of u."""
    a, b, p = problem.a, problem.b, problem.p
    G = alpha**2 * eb.a_plus + 2 * alpha * beta * eb.cross + beta**2 * eb.a_minus
    return (
        0.5 * a * G
        + 0.25 * b * G * G
        + 0.5 * (alpha**2 * eb.b_plus + beta**2 * eb.b_minus)
        - np.abs(alpha) ** p * eb.nl_plus
        - np.abs(beta) ** p * eb.nl_minus
    )


def pairing(problem: Problem, u, phi) -> float:
    """<I'(u), phi>."""
    uv = values_of(u, problem.grid)
    pv = values_of(phi, problem.grid)
    k = problem.kernel
    Qu = k.apply(uv)
    G = 2.0 * float(uv @ Qu)
    coeff = problem.a + problem.b * G
    fu = _pow(uv, problem.p - 2.0) * uv
    return coeff * 2.0 * float(Qu @ pv) + problem.w * float(np.sum((problem.V * uv - fu) * pv))


def residual(problem: Problem, u):
    """L2 (grid-weighted) representative r of I'(u): w * sum r phi = <I'(u), phi>."""
    uv = values_of(u, problem.grid)
    r = _residual_values(problem, uv)
    return Field(problem.grid, r) if isinstance(u, Field) else r


def _residual_values(problem: Problem, uv: np.ndarray) -> np.ndarray:
    Qu = problem.kernel.apply(uv)
    G = 2.0 * float(uv @ Qu)
    coeff = problem.a + problem.b * G
    return (2.0 * coeff / problem.w) * Qu + problem.V * uv - _pow(uv, problem.p - 2.0) * uv


class DegenerateSplit(ValueError):
    """The positive or the negative part of a field vanishes."""


def decomposition_excess(problem: Problem, u) -> float:
    """I(u) - I(u+) - I(u-), computed by direct subtraction of the energy terms."""
    uv = values_of(u, problem.grid)
    up = np.maximum(uv, 0.0)
    um = np.minimum(uv, 0.0)
    if not np.any(up) or not np.any(um):
        raise DegenerateSplit("decomposition excess needs u+ != 0 and u- != 0")
    a, b, p, w = problem.a, problem.b, problem.p, problem.w
    G, Gp, Gm = (gagliardo_energy(problem, v) for v in (uv, up, um))
    quad = 0.5 * a * (G - Gp - Gm) + 0.25 * b * (G * G - Gp * Gp - Gm * Gm)
    # same subtraction regrouped: the local terms are differenced cell by
    # cell, where they cancel exactly because u+ u- = 0
    V = problem.V
    local = 0.5 * V * (uv * uv - up * up - um * um) - (_pow(uv, p) - _pow(up, p) - _pow(um, p)) / p
    return quad + w * float(np.sum(local))


def decomposition_excess_closed_form(problem: Problem, eb: EnergyBreakdown) -> float:
    """a C + b/4 [(A+ + 2C + A-)^2 - (A+)^2 - (A-)^2]."""
    G = eb.a_plus + 2 * eb.cross + eb.a_minus
    return problem.a * eb.cross + 0.25 * problem.b * (G * G - eb.a_plus**2 - eb.a_minus**2)


def pairing_gap(problem: Problem, eb: EnergyBreakdown, sign: int = +1) -> float:
    """<I'(u), u+-> - <I'(u+-), u+-> in closed form; positive for sign-changing u."""
    G = eb.gagliardo
    own = eb.a_plus if sign > 0 else eb.a_minus
    return problem.a * eb.cross + problem.b * (G * (own + eb.cross) - own * own)
