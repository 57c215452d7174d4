"""Shared derivative-free simplex minimization with restarts.

Nelder-Mead rarely satisfies scipy's strict success test on 10+ parameter
problems within a bounded iteration budget, but restarting the simplex at
the incumbent keeps improving the objective geometrically. A fit therefore
counts as converged when either scipy reports success or a whole restart
improves the objective by less than ``stall_tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class FitDiagnostics:
    converged: bool
    objective: float
    n_evaluations: int
    n_restarts: int
    trace: tuple[float, ...] = ()  # best objective after each restart


def minimize_simplex(
    objective,
    x0,
    *,
    maxiter: int = 500,
    tol: float = 1e-8,
    restarts: int = 8,
    stall_tol: float | None = None,
    step: float = 0.25,
    trace_iterations: bool = False,
):
    """Minimize with restarted Nelder-Mead; returns (x, FitDiagnostics).

    ``step`` sets the absolute edge length of the initial simplex (the
    parameters are expected to be O(1)-scaled by the caller); restarts use
    a smaller simplex around the incumbent.
    """
    if stall_tol is None:
        stall_tol = max(100.0 * tol, 1e-7)
    x = np.asarray(x0, dtype=float)
    n = len(x)
    best = np.inf
    nev = 0
    converged = False
    n_restarts = 0
    trace: list[float] = []
    iter_trace: list[float] = []
    if trace_iterations:
        callback = lambda xk: iter_trace.append(min(best, objective(xk)))
    else:
        callback = None
    for r in range(max(1, restarts)):
        n_restarts = r + 1
        width = step if r == 0 else step * 0.2
        simplex = np.tile(x, (n + 1, 1))
        for i in range(n):
            simplex[i + 1, i] += width
        res = minimize(
            objective,
            x,
            method="Nelder-Mead",
            callback=callback,
            options=dict(
                maxiter=maxiter,
                fatol=tol,
                xatol=tol,
                initial_simplex=simplex,
            ),
        )
        nev += res.nfev
        improvement = best - res.fun
        if res.fun < best:
            best = float(res.fun)
            x = res.x
        trace.append(best)
        if res.success or (r > 0 and improvement < stall_tol):
            converged = True
            break
    diag = FitDiagnostics(
        converged=converged,
        objective=best,
        n_evaluations=nev,
        n_restarts=n_restarts,
        trace=tuple(iter_trace) if trace_iterations else tuple(trace),
    )
    return x, diag
