"""Box-projected quasi-Newton machinery shared by both fitters."""

import numpy as np
from scipy.optimize import minimize

from dpdmon.exceptions import OptimizationError


def project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def projected_gradient(x, g, lower, upper, tol=1e-12):
    """Gradient with components zeroed where the box is active and pushing out."""
    pg = np.array(g, dtype=float)
    at_lo = (x <= lower + tol) & (pg > 0)
    at_hi = (x >= upper - tol) & (pg < 0)
    pg[at_lo | at_hi] = 0.0
    return pg


def _fd_hessian(fun_grad, x, lower, upper, rel_step=1e-6):
    """Central-difference Hessian of the analytic gradient; one-sided at the box."""
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        h = rel_step * max(1.0, abs(x[i]))
        lo_ok = x[i] - h >= lower[i]
        hi_ok = x[i] + h <= upper[i]
        xp = x.copy()
        xm = x.copy()
        if lo_ok and hi_ok:
            xp[i] += h
            xm[i] -= h
            _, gp = fun_grad(xp)
            _, gm = fun_grad(xm)
            H[:, i] = (gp - gm) / (2 * h)
        else:
            step = h if hi_ok else -h
            xp[i] += step
            _, gp = fun_grad(xp)
            _, g0 = fun_grad(x)
            H[:, i] = (gp - g0) / step
    return 0.5 * (H + H.T)


def polish_newton(fun_grad, x0, lower, upper, target=1e-11, maxiter=40):
    """Drive the projected gradient toward machine level with damped Newton steps.

    L-BFGS-B typically stalls around 1e-6..1e-8 in the gradient; a few Newton
    iterations with a finite-difference Hessian of the analytic gradient close
    the rest.  Steps are projected into the box and backtracked; the objective
    is never allowed to increase (beyond ulp noise), so polishing cannot leave
    the basin the optimizer found.  Returns (x, f, g).
    """
    x = project(np.asarray(x0, dtype=float), lower, upper)
    f, g = fun_grad(x)
    for _ in range(maxiter):
        pg = projected_gradient(x, g, lower, upper)
        pg_norm = np.max(np.abs(pg))
        if pg_norm <= target:
            break
        H = _fd_hessian(fun_grad, x, lower, upper)
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(x.size), -g)
        except np.linalg.LinAlgError:
            step = -pg
        improved = False
        t = 1.0
        flat_tol = 1e-12 * max(1.0, abs(f))
        for _ in range(30):
            cand = project(x + t * step, lower, upper)
            fc, gc = fun_grad(cand)
            pgc = np.max(np.abs(projected_gradient(cand, gc, lower, upper)))
            if fc < f or (fc <= f + flat_tol and pgc < pg_norm):
                x, f, g = cand, fc, gc
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return x, f, g


def multistart_minimize(fun_grad, starts, lower, upper, conv_tol, engine, make_result):
    """Run L-BFGS-B from each start, polish the best, and package a FitResult.

    ``make_result(x, f, g_pnorm, converged, n_starts)`` builds the result.
    Raises :class:`OptimizationError` (carrying the best iterate's result)
    when no start reaches ``conv_tol`` in the projected gradient.
    """
    bounds = list(zip(lower, upper))
    best = None
    for x0 in starts:
        x0 = project(np.asarray(x0, dtype=float), lower, upper)
        res = minimize(
            fun_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-10},
        )
        if best is None or res.fun < best.fun:
            best = res
    x, f, g = polish_newton(fun_grad, best.x, lower, upper)
    pg_norm = float(np.max(np.abs(projected_gradient(x, g, lower, upper))))
    if pg_norm > conv_tol:
        # narrow curved valleys (typical near the parameter box under heavy
        # contamination) can stall the Newton polish; give L-BFGS-B another,
        # longer run from the current point and polish once more
        res = minimize(
            fun_grad,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 5000, "ftol": 1e-16, "gtol": 1e-12, "maxcor": 30},
        )
        x2, f2, g2 = polish_newton(fun_grad, res.x, lower, upper)
        if f2 <= f:
            x, f, g = x2, f2, g2
            pg_norm = float(np.max(np.abs(projected_gradient(x, g, lower, upper))))
    converged = pg_norm <= conv_tol
    result = make_result(x, f, pg_norm, converged, len(starts))
    if not converged:
        raise OptimizationError(
            f"{engine} MDPDE fit did not converge: projected gradient {pg_norm:.3e} "
            f"exceeds {conv_tol:.1e} after {len(starts)} starts",
            best=result,
        )
    return result
