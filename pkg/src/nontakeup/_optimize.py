"""Quasi-Newton minimisation with a Newton polish near the optimum."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import ConvergenceError

FunGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    reason: str
    trajectory: list = field(default_factory=list)
    hessian: Optional[np.ndarray] = None


def numerical_hessian(fun_grad: FunGrad, x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Symmetrised central differences of an analytic gradient."""
    k = len(x)
    hess = np.empty((k, k))
    for j in range(k):
        h = rel_step * max(1.0, abs(x[j]))
        up, down = x.copy(), x.copy()
        up[j] += h
        down[j] -= h
        hess[:, j] = (fun_grad(up)[1] - fun_grad(down)[1]) / (2 * h)
    return 0.5 * (hess + hess.T)


def _line_search(fun_grad, x, f, g, direction, max_halvings=60, c1=1e-4):
    slope = float(g @ direction)
    step = 1.0
    for _ in range(max_halvings):
        x_new = x + step * direction
        f_new, g_new = fun_grad(x_new)
        if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
            return step, x_new, f_new, g_new
        step *= 0.5
    return 0.0, x, f, g


def minimize(
    fun_grad: FunGrad,
    x0: np.ndarray,
    tol_grad: float = 1e-8,
    tol_rel: float = 1e-12,
    max_iter: int = 500,
    polish: int = 3,
    max_abs_x: float = 1e4,
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> OptimizeResult:
    """Minimise ``f`` by BFGS with backtracking (Armijo) line search.

    Stops when the gradient max-norm falls below ``tol_grad`` or the
    relative change in ``f`` below ``tol_rel``; then takes up to ``polish``
    Newton steps on one finite-difference (or supplied) Hessian, each kept
    only if it does not raise ``f``.  That Hessian is returned with the
    result.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations, when the line search stalls far from
        a stationary point, or when parameters diverge (``|x| > max_abs_x``,
        the signature of perfect separation).
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ConvergenceError("objective is not finite at the starting values", [])
    k = len(x)
    inv_h = np.eye(k)
    trajectory = [(0, f, float(np.max(np.abs(g), initial=0.0)), 0.0)]
    reason = ""
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(g), initial=0.0))
        if gnorm < tol_grad:
            reason = "gradient"
            break
        direction = -inv_h @ g
        if float(g @ direction) >= 0:
            inv_h = np.eye(k)
            direction = -g
        step, x_new, f_new, g_new = _line_search(fun_grad, x, f, g, direction)
        if step == 0.0:
            if gnorm < 1e-5:
                reason = "line search stalled near a stationary point"
                break
            raise ConvergenceError(
                f"line search failed at iteration {it} (gradient max-norm {gnorm:.3g})", trajectory
            )
        s = x_new - x
        yk = g_new - g
        rel = abs(f_new - f) / max(abs(f), 1e-300)
        x, f, g = x_new, f_new, g_new
        trajectory.append((it, f, float(np.max(np.abs(g), initial=0.0)), step))
        if np.max(np.abs(x)) > max_abs_x:
            raise ConvergenceError(
                f"parameters diverge (max |x| = {np.max(np.abs(x)):.3g}); data may be perfectly separated",
                trajectory,
            )
        sy = float(s @ yk)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(yk)):
            if it == 1:
                inv_h = np.eye(k) * sy / float(yk @ yk)
            rho = 1.0 / sy
            v = np.eye(k) - rho * np.outer(s, yk)
            inv_h = v @ inv_h @ v.T + rho * np.outer(s, s)
        if rel < tol_rel:
            reason = "relative change"
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations", trajectory)

    hess = None
    if polish:
        hess = hessian(x) if hessian is not None else numerical_hessian(fun_grad, x)
    for _ in range(polish):
        try:
            step = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            break
        f_new, g_new = fun_grad(x + step)
        if not (np.isfinite(f_new) and f_new <= f):
            break
        x, f, g = x + step, f_new, g_new
        trajectory.append((len(trajectory), f, float(np.max(np.abs(g), initial=0.0)), 1.0))
        if float(np.max(np.abs(step))) < 1e-12 * max(1.0, float(np.max(np.abs(x)))):
            break
    return OptimizeResult(x, f, g, it, True, reason, trajectory, hess)
