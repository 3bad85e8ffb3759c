"""Preconditioned conjugate gradient with residual history, stagnation
detection and per-apply preconditioner timing."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

STAGNATION_WINDOW = 30
STAGNATION_FACTOR = 1e-3


@dataclass
class PcgReport:
    n_it: int
    achieved_residual: float
    t_pcg: float
    t_s: float
    residual_history: list[float] = field(repr=False)
    stagnated: bool = False
    converged: bool = False


def _as_callable(operator):
    if callable(operator):
        return operator
    if hasattr(operator, "matvec"):
        return operator.matvec
    if hasattr(operator, "apply"):
        return operator.apply
    raise TypeError(f"cannot apply operator of type {type(operator).__name__}")


def make_rhs(matvec, n: int, mode: str = "random", seed: int = 0):
    """Right-hand side for Au = f.

    ``random`` draws u_exact ~ N(0,1) from a seeded generator and returns
    (A u_exact, u_exact) so the true error is reportable; ``noise`` draws f
    itself i.i.d. standard normal (the family that reproduces the reference
    iteration counts); ``ones`` returns (all-ones, None).
    """
    if mode == "random":
        u_exact = np.random.default_rng(seed).standard_normal(n)
        return _as_callable(matvec)(u_exact), u_exact
    if mode == "noise":
        return np.random.default_rng(seed).standard_normal(n), None
    if mode == "ones":
        return np.ones(n), None
    raise ValueError(f"rhs mode must be 'random', 'noise' or 'ones', got {mode!r}")


def solve(
    matvec,
    precond,
    f: np.ndarray,
    tol: float = 1e-12,
    max_iters: int | None = None,
) -> tuple[np.ndarray, PcgReport]:
    """Run PCG on Au = f from u0 = 0 until the relative recurrence residual
    drops below tol, iterations stagnate (residual reduction below
    ``STAGNATION_FACTOR`` over ``STAGNATION_WINDOW`` consecutive iterations),
    or max_iters is hit."""
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must be in (0, 1), got {tol}")
    apply_a = _as_callable(matvec)
    apply_t = _as_callable(precond) if precond is not None else lambda x: x.copy()
    f = np.asarray(f, dtype=float)
    n = f.size
    if max_iters is None:
        max_iters = max(2 * n, 100)

    norm_f = float(np.linalg.norm(f))
    u = np.zeros(n)
    if norm_f == 0.0:
        return u, PcgReport(
            n_it=0, achieved_residual=0.0, t_pcg=0.0, t_s=0.0,
            residual_history=[0.0], converged=True,
        )

    t0 = time.perf_counter()
    t_prec = 0.0
    n_prec = 0
    r = f.copy()
    tp = time.perf_counter()
    z = apply_t(r)
    t_prec += time.perf_counter() - tp
    n_prec += 1
    p = z.copy()
    rho = float(r @ z)
    history = [1.0]
    stagnated = False
    converged = False
    k = 0
    while k < max_iters:
        k += 1
        q = apply_a(p)
        denom = float(p @ q)
        if not np.isfinite(denom) or denom <= 0.0:
            raise FloatingPointError(
                f"PCG breakdown at iteration {k}: p^T A p = {denom}"
            )
        alpha = rho / denom
        u += alpha * p
        r -= alpha * q
        # stop on the true residual so stagnation against round-off is visible
        rel = float(np.linalg.norm(f - apply_a(u))) / norm_f
        if not np.isfinite(rel):
            raise FloatingPointError(f"non-finite residual at iteration {k}")
        history.append(rel)
        if rel <= tol:
            converged = True
            break
        if k >= STAGNATION_WINDOW:
            prev = history[k - STAGNATION_WINDOW]
            if rel > (1.0 - STAGNATION_FACTOR) * prev:
                stagnated = True
                break
        tp = time.perf_counter()
        z = apply_t(r)
        t_prec += time.perf_counter() - tp
        n_prec += 1
        rho_next = float(r @ z)
        p = z + (rho_next / rho) * p
        rho = rho_next
    report = PcgReport(
        n_it=k,
        achieved_residual=history[-1],
        t_pcg=time.perf_counter() - t0,
        t_s=t_prec / max(n_prec, 1),
        residual_history=history,
        stagnated=stagnated,
        converged=converged,
    )
    return u, report
