"""Adam and L-BFGS minimizers over flat parameter vectors.

Both are deterministic given the objective and starting point.  L-BFGS
uses the two-loop recursion with a strong-Wolfe line search; stored
curvature pairs always satisfy s.y > 0 (violations are skipped), and a
failed line search falls back to one backtracking steepest-descent step
before giving up.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and hyperparameters of bias-corrected Adam."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def fresh(n_params: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return AdamState(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One bias-corrected Adam update; returns (new state, new params)."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to adam_step")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=t), new_params


@dataclass(frozen=True)
class LbfgsOptions:
    """History size, Wolfe constants and bracketing limits."""

    history: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_bracket: int = 30


@dataclass
class OptimReport:
    reason: str
    iterations: int
    final_loss: float
    grad_inf_norm: float
    n_evals: int


def _zoom(evaluate, x, d, lo, hi, phi0, dphi0, opts):
    """Strong-Wolfe zoom stage; quadratic interpolation with bisection guard."""
    a_lo, f_lo, g_lo = lo
    a_hi, f_hi, _ = hi
    for _ in range(opts.max_bracket):
        span = a_hi - a_lo
        dphi_lo = g_lo @ d
        # minimize the quadratic through (a_lo, f_lo, dphi_lo) and (a_hi, f_hi)
        denom = f_hi - f_lo - dphi_lo * span
        a = a_lo - 0.5 * dphi_lo * span * span / denom if denom != 0.0 else a_lo + 0.5 * span
        if not np.isfinite(a) or a <= min(a_lo, a_hi) + 0.1 * abs(span) \
                or a >= max(a_lo, a_hi) - 0.1 * abs(span):
            a = a_lo + 0.5 * span
        f, g = evaluate(x + a * d)
        if f > phi0 + opts.c1 * a * dphi0 or f >= f_lo:
            a_hi, f_hi = a, f
        else:
            dphi = g @ d
            if abs(dphi) <= -opts.c2 * dphi0:
                return a, f, g
            if dphi * span >= 0.0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo, g_lo = a, f, g
    return None


def _strong_wolfe(evaluate, x, d, f0, g0, opts, alpha0=1.0):
    """Bracket + zoom line search; returns (alpha, f, g) or None."""
    phi0 = f0
    dphi0 = g0 @ d
    if dphi0 >= 0.0:
        return None
    a_prev, f_prev, g_prev = 0.0, f0, g0
    alpha = alpha0
    for i in range(opts.max_bracket):
        f, g = evaluate(x + alpha * d)
        if f > phi0 + opts.c1 * alpha * dphi0 or (i > 0 and f >= f_prev):
            return _zoom(evaluate, x, d, (a_prev, f_prev, g_prev), (alpha, f, g),
                         phi0, dphi0, opts)
        dphi = g @ d
        if abs(dphi) <= -opts.c2 * dphi0:
            return alpha, f, g
        if dphi >= 0.0:
            return _zoom(evaluate, x, d, (alpha, f, g), (a_prev, f_prev, g_prev),
                         phi0, dphi0, opts)
        a_prev, f_prev, g_prev = alpha, f, g
        alpha *= 2.0
    return None


def lbfgs_minimize(loss_fn, params: np.ndarray, options: LbfgsOptions | None = None,
                   grad_tol: float = 1e-9, ftol: float = 1e-12, max_iters: int = 3000,
                   callback=None):
    """Minimize ``loss_fn(params) -> (value, gradient)`` by L-BFGS.

    Stops on the infinity norm of the gradient, on relative loss decrease
    below `ftol`, or on the iteration cap; a line-search failure takes a
    single backtracking steepest-descent step and terminates only if even
    that cannot decrease the loss (or on two fallbacks in a row).
    `callback(iteration, f, grad_inf, step_len)` runs once per accepted
    iterate.
    """
    if options is None:
        options = LbfgsOptions()
    evals = 0

    def evaluate(p):
        nonlocal evals
        evals += 1
        f, g = loss_fn(p)
        if not np.isfinite(f):
            raise NumericError("objective returned a non-finite value")
        return float(f), np.asarray(g, dtype=np.float64)

    x = np.asarray(params, dtype=np.float64).copy()
    f, g = evaluate(x)
    history: deque = deque(maxlen=options.history)
    fallback_streak = 0
    iteration = 0
    while True:
        grad_inf = float(np.max(np.abs(g))) if g.size else 0.0
        if grad_inf < grad_tol:
            return x, OptimReport("grad_tol", iteration, f, grad_inf, evals)
        if iteration >= max_iters:
            return x, OptimReport("max_iters", iteration, f, grad_inf, evals)

        d = _two_loop_direction(g, history)
        alpha0 = 1.0 if history else min(1.0, 1.0 / max(grad_inf, 1e-12))
        hit = _strong_wolfe(evaluate, x, d, f, g, options, alpha0=alpha0)
        if hit is None:
            # steepest-descent rescue with plain backtracking; give up if
            # even that fails, or after two rescues in a row
            d = -g
            hit = _backtrack(evaluate, x, d, f, g, options)
            history.clear()
            fallback_streak += 1
            if hit is None:
                return x, OptimReport("line_search_failure", iteration, f, grad_inf, evals)
            if fallback_streak >= 2:
                alpha, f, g = hit
                x = x + alpha * d
                return x, OptimReport("line_search_failure", iteration + 1, f,
                                      float(np.max(np.abs(g))), evals)
        else:
            fallback_streak = 0
        alpha, f_new, g_new = hit
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-16 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            history.append((s, y, 1.0 / sy))
        x = x + s
        rel_decrease = (f - f_new) / max(abs(f), 1.0)
        f, g = f_new, g_new
        iteration += 1
        if callback is not None:
            callback(iteration, f, float(np.max(np.abs(g))), float(np.linalg.norm(s)))
        if 0.0 <= rel_decrease < ftol:
            return x, OptimReport("ftol", iteration, f, float(np.max(np.abs(g))), evals)


def _two_loop_direction(g: np.ndarray, history) -> np.ndarray:
    """Two-loop recursion for the L-BFGS search direction."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if history:
        s, y, _ = history[-1]
        gamma = (s @ y) / (y @ y)
        q *= gamma
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _backtrack(evaluate, x, d, f0, g0, opts):
    """Armijo backtracking; returns (alpha, f, g) or None."""
    dphi0 = g0 @ d
    alpha = 1.0
    for _ in range(60):
        f, g = evaluate(x + alpha * d)
        if f <= f0 + opts.c1 * alpha * dphi0:
            return alpha, f, g
        alpha *= 0.5
    return None
