"""Nehari projections.

The nodal projection looks for the unique (alpha, beta) > 0 with

    W(alpha, beta) = (<I'(alpha u+ + beta u-), alpha u+>,
                      <I'(alpha u+ + beta u-), beta u->) = 0.

W is a polynomial in (alpha, beta) with coefficients built from the
component quantities of u, plus one power term alpha^p (resp. beta^p), so
it is evaluated in closed form once the components are known.  The zero is
bracketed by a box on whose faces W has Miranda signs, narrowed by
bisection and polished with damped Newton.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BracketFailure, FaceSignViolation, NoConvergence
from .functional import DegenerateSplit, EnergyBreakdown, Problem, components
from .discretization import values_of
from .model import ModelParams


@dataclass(frozen=True)
class MirandaBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError(f"box needs lower < upper componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    @classmethod
    def square(cls, r: float, R: float, dim: int = 2) -> "MirandaBox":
        return cls(np.full(dim, float(r)), np.full(dim, float(R)))


def _face_points(lo: np.ndarray, hi: np.ndarray, axis: int, value: float, samples: int) -> np.ndarray:
    n = lo.size
    axes = [np.linspace(lo[j], hi[j], samples) for j in range(n) if j != axis]
    if axes:
        pts = np.array(list(itertools.product(*axes)))
    else:
        pts = np.zeros((1, 0))
    return np.insert(pts, axis, value, axis=1)


def _batch(F: Callable, vectorized: bool) -> Callable[[np.ndarray], np.ndarray]:
    if vectorized:
        return lambda X: np.asarray(F(X), dtype=float)
    return lambda X: np.array([np.asarray(F(x), dtype=float) for x in X])


def face_signs_hold(F, box: MirandaBox, samples: int = 33, vectorized: bool = False, strict: bool = False) -> list[str]:
    """Return the list of violated face conditions (empty when all hold).

    Component i must be >= 0 on the face x_i = lower_i and <= 0 on the
    face x_i = upper_i.
    """
    Fb = _batch(F, vectorized)
    failed = []
    for i in range(box.dim):
        for side, value in (("lower", box.lower[i]), ("upper", box.upper[i])):
            vals = Fb(_face_points(box.lower, box.upper, i, value, samples))[:, i]
            if side == "lower":
                ok = np.all(vals > 0) if strict else np.all(vals >= 0)
            else:
                ok = np.all(vals < 0) if strict else np.all(vals <= 0)
            if not ok:
                failed.append(f"{side}-{i}")
    return failed


def _fd_jacobian(F1: Callable, x: np.ndarray, fx: np.ndarray) -> np.ndarray:
    n = x.size
    J = np.empty((fx.size, n))
    for j in range(n):
        h = 6e-6 * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (F1(x + e) - F1(x - e)) / (2 * h)
    return J


def _damped_newton(F1, jac, x, box: MirandaBox, tol: float, norm=None, max_iter: int = 60,
                   max_halvings: int = 40):
    if norm is None:
        norm = lambda x, fx: float(np.max(np.abs(fx)))  # noqa: E731
    fx = F1(x)
    nrm = norm(x, fx)
    for it in range(max_iter + 1):
        if nrm <= tol:
            return _polish(F1, jac, x, fx, nrm, box, norm) + (it,)
        if it == max_iter:
            break
        J = jac(x, fx) if jac is not None else _fd_jacobian(F1, x, fx)
        try:
            step = np.linalg.solve(J, fx)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian at {x}") from exc
        lam = 1.0
        for _ in range(max_halvings):
            xn = x - lam * step
            if box.contains(xn):
                fn = F1(xn)
                nn = norm(xn, fn)
                if nn < nrm:
                    x, fx, nrm = xn, fn, nn
                    break
            lam *= 0.5
        else:
            break
    raise NoConvergence(f"Newton stalled at residual {nrm:.3e} > tol = {tol:.1e}")


def _polish(F1, jac, x, fx, nrm, box: MirandaBox, norm, steps: int = 2):
    """Extra full Newton steps past the tolerance, kept while they help."""
    for _ in range(steps):
        if nrm == 0:
            break
        J = jac(x, fx) if jac is not None else _fd_jacobian(F1, x, fx)
        try:
            xn = x - np.linalg.solve(J, fx)
        except np.linalg.LinAlgError:
            break
        if not box.contains(xn):
            break
        fn = F1(xn)
        nn = norm(xn, fn)
        if not nn < nrm:
            break
        x, fx, nrm = xn, fn, nn
    return x, nrm


def _miranda(F, box: MirandaBox, tol: float, jac=None, vectorized=False, samples=33,
             max_depth=200, width_tol=1e-3, check_faces=True, norm=None):
    Fb = _batch(F, vectorized)
    F1 = lambda x: Fb(x[None, :])[0]  # noqa: E731

    if check_faces:
        failed = face_signs_hold(F, box, samples, vectorized)
        if failed:
            raise FaceSignViolation(f"face sign conditions fail on {', '.join(failed)}")

    lo, hi = box.lower.copy(), box.upper.copy()
    floor = box.upper - box.lower
    for _ in range(max_depth):
        width = hi - lo
        scale = np.maximum(np.maximum(np.abs(lo), np.abs(hi)), floor)
        if np.all(width <= width_tol * scale):
            break
        mid = 0.5 * (lo + hi)
        fm = F1(mid)
        if (norm(mid, fm) if norm else np.max(np.abs(fm))) <= tol:
            return mid, 0
        k = int(np.argmax(width / scale))
        vals = Fb(_face_points(lo, hi, k, mid[k], samples))[:, k]
        # lower half keeps F_k >= 0 at lo_k, needs F_k <= 0 on the cut;
        # on a tie the lower half is taken
        if np.all(vals <= 0):
            hi[k] = mid[k]
        elif np.all(vals >= 0):
            lo[k] = mid[k]
        else:
            break
    try:
        x, _, iters = _damped_newton(F1, jac, 0.5 * (lo + hi), box, tol, norm=norm)
    except NoConvergence:
        if box.dim != 2:
            raise
        # the last box still carries the face signs, so nested bracketing
        # (alpha for each beta, then beta) cannot fail; Newton polishes
        x0 = _nested_2d(F1, lo, hi)
        x, _, iters = _damped_newton(F1, jac, x0, box, tol, norm=norm)
    return x, iters


def _bisect(f, lo: float, hi: float, iters: int = 64) -> float:
    """Sign change of f with f(lo) >= 0 >= f(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _nested_2d(F1, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    def alpha_of(beta):
        return _bisect(lambda a: F1(np.array([a, beta]))[0], lo[0], hi[0])

    beta = _bisect(lambda b: F1(np.array([alpha_of(b), b]))[1], lo[1], hi[1])
    return np.array([alpha_of(beta), beta])


def miranda_solve(F: Callable, box: MirandaBox, tol: float = 1e-10, jac: Callable | None = None,
                  vectorized: bool = False, samples: int = 33) -> np.ndarray:
    """Zero of F in ``box`` under Poincare-Miranda face signs.

    The sign conditions are checked on a lattice of ``samples`` points per
    face edge; the box is then bisected along its longest axis, keeping the
    half on which the signs persist, and the last box is handed to damped
    Newton (finite-difference Jacobian unless ``jac(x, F(x))`` is given).

    Raises FaceSignViolation when the sampled conditions fail and
    NoConvergence when Newton cannot reach ``tol``.
    """
    x, _ = _miranda(F, box, tol, jac=jac, vectorized=vectorized, samples=samples)
    return x


def w_field(mp: ModelParams, eb: EnergyBreakdown, alpha, beta):
    """Closed form of W(alpha, beta); broadcasts over array arguments."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ValueError("alpha and beta must be positive")
    a, b, p = mp.a, mp.b, mp.p
    Ap, Am, C = eb.a_plus, eb.a_minus, eb.cross
    G = alpha**2 * Ap + 2 * alpha * beta * C + beta**2 * Am
    mix_p = alpha**2 * Ap + alpha * beta * C
    mix_m = beta**2 * Am + alpha * beta * C
    w1 = (a + b * G) * mix_p + alpha**2 * eb.b_plus - alpha**p * eb.fdot_plus
    w2 = (a + b * G) * mix_m + beta**2 * eb.b_minus - beta**p * eb.fdot_minus
    if w1.ndim == 0:
        return float(w1), float(w2)
    return w1, w2


def w_scale(mp: ModelParams, eb: EnergyBreakdown, alpha: float, beta: float) -> tuple[float, float]:
    """Sum of the magnitudes of the terms of each component of W.

    At a zero the positive terms balance alpha^p int|u+|^p, so this is the
    size against which the roundoff in W has to be measured.
    """
    a, b, p = mp.a, mp.b, mp.p
    G = alpha**2 * eb.a_plus + 2 * alpha * beta * eb.cross + beta**2 * eb.a_minus
    s1 = (a + b * G) * (alpha**2 * eb.a_plus + alpha * beta * eb.cross) + alpha**2 * eb.b_plus
    s2 = (a + b * G) * (beta**2 * eb.a_minus + alpha * beta * eb.cross) + beta**2 * eb.b_minus
    return s1 + alpha**p * eb.fdot_plus, s2 + beta**p * eb.fdot_minus


def w_relative_residual(mp: ModelParams, eb: EnergyBreakdown, alpha: float, beta: float) -> float:
    w1, w2 = w_field(mp, eb, alpha, beta)
    s1, s2 = w_scale(mp, eb, alpha, beta)
    return max(abs(w1) / s1, abs(w2) / s2)


def w_jacobian(mp: ModelParams, eb: EnergyBreakdown, alpha: float, beta: float) -> np.ndarray:
    a, b, p = mp.a, mp.b, mp.p
    Ap, Am, C = eb.a_plus, eb.a_minus, eb.cross
    G = alpha**2 * Ap + 2 * alpha * beta * C + beta**2 * Am
    Ga = 2 * alpha * Ap + 2 * beta * C
    Gb = 2 * beta * Am + 2 * alpha * C
    mp_ = alpha**2 * Ap + alpha * beta * C
    mm_ = beta**2 * Am + alpha * beta * C
    k = a + b * G
    return np.array(
        [
            [
                b * Ga * mp_ + k * (2 * alpha * Ap + beta * C) + 2 * alpha * eb.b_plus
                - p * alpha ** (p - 1) * eb.fdot_plus,
                b * Gb * mp_ + k * alpha * C,
            ],
            [
                b * Ga * mm_ + k * beta * C,
                b * Gb * mm_ + k * (2 * beta * Am + alpha * C) + 2 * beta * eb.b_minus
                - p * beta ** (p - 1) * eb.fdot_minus,
            ],
        ]
    )


@dataclass(frozen=True)
class NehariPair:
    """``residual_norm`` is max_i |W_i| / (sum of the magnitudes of the terms
    of W_i); ``residual_abs`` is the raw max_i |W_i|."""

    alpha: float
    beta: float
    residual_norm: float
    bracket: MirandaBox
    newton_iters: int
    residual_abs: float = 0.0

    def distance_to_unit(self) -> float:
        return max(abs(self.alpha - 1.0), abs(self.beta - 1.0))


def _single_scale(a: float, b: float, p: float, A: float, B: float, P: float) -> float:
    """Positive root of (a A + B) + b A^2 t^2 = P t^(p-2)."""
    return _solve_decreasing(lambda t: (a * A + B) / t**2 + b * A * A - P * t ** (p - 4.0),
                             lambda t: -2 * (a * A + B) / t**3 - (p - 4.0) * P * t ** (p - 5.0))


def _solve_decreasing(h, dh, t0: float = 1.0, rtol: float = 4e-16, max_iter: int = 200) -> float:
    """Root of a strictly decreasing h on (0, inf): bracket by doubling, then Newton with bisection fallback."""
    lo = hi = t0
    while h(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            raise NoConvergence("no positive root: h <= 0 near 0")
    while h(hi) >= 0:
        hi *= 2.0
        if hi > 1e300:
            raise NoConvergence("no positive root: h >= 0 at large t")
    t = np.sqrt(lo * hi)
    for _ in range(max_iter):
        ht = h(t)
        if ht == 0:
            return t
        if ht > 0:
            lo = t
        else:
            hi = t
        d = dh(t)
        tn = t - ht / d if d < 0 else 0.5 * (lo + hi)
        if not lo < tn < hi:
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= rtol * t or hi - lo <= rtol * hi:
            return tn
        t = tn
    raise NoConvergence("scalar Nehari root did not converge")


def find_bracket(mp: ModelParams, eb: EnergyBreakdown, guess=None, samples: int = 33,
                 max_expansions: int = 60) -> MirandaBox:
    """Square [r, R]^2 with strict Miranda signs of W on its faces."""
    if guess is not None:
        r, R = 0.5 * min(guess), 2.0 * max(guess)
    else:
        t_plus = _single_scale(mp.a, mp.b, mp.p, eb.a_plus, eb.b_plus, eb.fdot_plus)
        t_minus = _single_scale(mp.a, mp.b, mp.p, eb.a_minus, eb.b_minus, eb.fdot_minus)
        # cross terms are positive, so each root lies above its single-part scale
        r, R = 0.5 * min(t_plus, t_minus), 4.0 * max(t_plus, t_minus)

    W = lambda X: np.column_stack(w_field(mp, eb, X[:, 0], X[:, 1]))  # noqa: E731
    for _ in range(max_expansions + 1):
        box = MirandaBox.square(r, R)
        with np.errstate(over="ignore", invalid="ignore"):
            failed = face_signs_hold(W, box, samples, vectorized=True, strict=True)
        if not failed:
            return box
        if any(f.startswith("lower") for f in failed):
            r /= 4.0
        if any(f.startswith("upper") for f in failed):
            R *= 4.0
    raise BracketFailure(f"no Miranda bracket after {max_expansions} expansions (last [{r:g}, {R:g}])")


def pair_project(problem: Problem, u, tol: float = 1e-10, guess=None, samples: int = 33,
                 eb: EnergyBreakdown | None = None) -> NehariPair:
    """Unique (alpha, beta) putting alpha u+ + beta u- on the nodal Nehari set.

    ``guess`` (e.g. the previous pair in an iteration) only centres the
    initial bracket; the Miranda signs are always verified.
    """
    if eb is None:
        uv = values_of(u, problem.grid)
        if not np.any(uv > 0) or not np.any(uv < 0):
            raise DegenerateSplit("pair projection needs u+ != 0 and u- != 0")
        eb = components(problem, uv)
    if eb.fdot_plus <= 0 or eb.fdot_minus <= 0:
        raise DegenerateSplit("pair projection needs u+ != 0 and u- != 0")
    mp = problem.params
    box = find_bracket(mp, eb, guess=guess, samples=samples)
    W = lambda X: np.column_stack(w_field(mp, eb, X[:, 0], X[:, 1]))  # noqa: E731
    jac = lambda x, fx: w_jacobian(mp, eb, x[0], x[1])  # noqa: E731
    # find_bracket already verified strict face signs on this box
    rel = lambda x, fx: w_relative_residual(mp, eb, x[0], x[1])  # noqa: E731
    x, iters = _miranda(W, box, tol, jac=jac, vectorized=True, samples=samples,
                        width_tol=1e-2, check_faces=False, norm=rel)
    res_abs = max(abs(v) for v in w_field(mp, eb, x[0], x[1]))
    return NehariPair(float(x[0]), float(x[1]), rel(x, None), box, iters, res_abs)


def scalar_project(problem: Problem, u, tol: float = 4e-16) -> float:
    """t > 0 with <I'(t u), t u> = 0 (unique because p > 4)."""
    uv = values_of(u, problem.grid)
    if not np.any(uv):
        raise ZeroFieldError("scalar projection of the zero field")
    S = 2.0 * float(uv @ problem.kernel.apply(uv))
    B = problem.w * float(np.sum(problem.V * uv * uv))
    P = problem.w * float(np.sum(np.abs(uv) ** problem.p))
    a, b, p = problem.a, problem.b, problem.p
    return _solve_decreasing(
        lambda t: (a * S + B) / t**2 + b * S * S - P * t ** (p - 4.0),
        lambda t: -2 * (a * S + B) / t**3 - (p - 4.0) * P * t ** (p - 5.0),
        rtol=tol,
    )


def scalar_project_closed_form(problem: Problem, u) -> float:
    """b = 0 only: t = ((a S + B) / P)^(1/(p-2))."""
    if problem.b != 0:
        raise ValueError("closed-form scalar projection requires b = 0")
    uv = values_of(u, problem.grid)
    if not np.any(uv):
        raise ZeroFieldError("scalar projection of the zero field")
    S = 2.0 * float(uv @ problem.kernel.apply(uv))
    B = problem.w * float(np.sum(problem.V * uv * uv))
    P = problem.w * float(np.sum(np.abs(uv) ** problem.p))
    return ((problem.a * S + B) / P) ** (1.0 / (problem.p - 2.0))


class ZeroFieldError(ValueError):
    pass
