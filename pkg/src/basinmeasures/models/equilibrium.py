"""Equilibrium location: model-specific bracketing followed by damped Newton."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import SystemModel


class EquilibriumError(RuntimeError):
    """No equilibrium could be found; carries the last residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray
    residual: float
    iterations: int = 0
    extinct: bool = False


def jacobian(fun, x, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian with step ``rel_step * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for i in range(n):
        h = rel_step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (fun(xp) - fun(xm)) / (xp[i] - xm[i])
    return J


def damped_newton(fun, x0, tol: float = 1e-10, maxiter: int = 200, in_domain=None):
    """Newton iteration with backtracking on the max-norm of the residual.

    Returns ``(x, residual, iterations)``. Raises :class:`EquilibriumError`
    if the residual does not drop below ``tol`` within ``maxiter`` steps.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = fun(x)
    res = float(np.max(np.abs(fx)))
    for it in range(maxiter):
        if res < tol:
            return x, res, it
        J = jacobian(fun, x)
        try:
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -fx, rcond=None)[0]
        lam = 1.0
        while lam > 1e-10:
            xn = x + lam * dx
            if in_domain is None or in_domain(xn):
                fn = fun(xn)
                rn = float(np.max(np.abs(fn)))
                if np.isfinite(rn) and rn < res:
                    break
            lam *= 0.5
        else:
            raise EquilibriumError("damped Newton stalled", res)
        x, fx, res = xn, fn, rn
    if res < tol:
        return x, res, maxiter
    raise EquilibriumError(f"no convergence in {maxiter} iterations", res)


def find_equilibrium(model: SystemModel, guess=None, tol: float = 1e-10) -> Equilibrium:
    """Locate an equilibrium of ``model`` with sup-norm residual below ``tol``.

    Bundled models provide a ``locate`` hook that brackets the wanted
    equilibrium on a one-dimensional reduction; its result is then polished
    by damped Newton. Without a hook, Newton starts from ``guess``.
    """
    extinct = False
    if getattr(model, "locate", None) is not None:
        start, extinct = model.locate(guess)
    elif guess is None:
        raise EquilibriumError("a starting guess is required for this model")
    else:
        start = np.asarray(guess, dtype=float)

    def fun(x):
        return model.f(x, 0.0)

    def in_domain(x):
        return model.contains(x)

    x, res, it = damped_newton(fun, start, tol=tol, in_domain=in_domain)
    return Equilibrium(state=x, residual=res, iterations=it, extinct=extinct)
