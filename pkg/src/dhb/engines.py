"""Distributed and centralized first-order algorithm engines.

Every engine is a value-semantics state machine: one step consumes a state
and returns a new one, corresponding to one synchronous round of neighbor
exchange plus local updates at all agents.
"""

import hashlib
import time
from dataclasses import dataclass, replace

import numpy as np

from .analysis import Trace
from .objectives import average_residual
from . import weights as wt

DIVERGENCE_RESIDUAL = 1e12
EIGEN_ESTIMATE_FLOOR = 1e3 * np.finfo(float).tiny

# weight-matrix slots each engine kind reads from its config
ENGINE_WEIGHTS = {
    "abm": ("A", "B"),
    "ab": ("A", "B"),
    "ds_tracking": ("W",),
    "extra": ("W",),
    "ab_extra": ("A", "B"),
    "addopt": ("B",),
    "frost": ("A",),
    "transformed_exact": ("A", "B"),
    "gd": (),
    "heavy_ball": (),
}

# engines whose auxiliary iterate must preserve the gradient sum
TRACKING_ENGINES = ("abm", "ab", "ds_tracking")

SCALAR_ALPHA_ENGINES = ("extra", "ab_extra", "transformed_exact", "gd", "heavy_ball")


class EngineError(Exception):
    pass


@dataclass(frozen=True)
class EngineConfig:
    """Engine kind plus per-agent step-sizes, momenta, and weight matrices."""

    kind: str
    alphas: np.ndarray
    betas: np.ndarray
    A: object = None       # row-stochastic WeightMatrix
    B: object = None       # column-stochastic WeightMatrix
    W: object = None       # doubly-stochastic WeightMatrix
    W_tilde: np.ndarray = None  # second EXTRA matrix, defaults to (I + W)/2

    def digest(self):
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(self.alphas.tobytes())
        h.update(self.betas.tobytes())
        for m in (self.A, self.B, self.W):
            if m is not None:
                h.update(m.entries.tobytes())
        return h.hexdigest()[:12]


def make_config(kind, n, alpha, beta=0.0, A=None, B=None, W=None, W_tilde=None):
    if kind not in ENGINE_WEIGHTS:
        raise EngineError(f"unknown engine kind {kind!r}")
    alphas = np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()
    betas = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    if np.any(alphas < 0) or np.any(betas < 0):
        raise EngineError("step-sizes and momenta must be nonnegative")
    if not np.any(alphas > 0):
        raise EngineError("at least one step-size must be positive")
    if kind in SCALAR_ALPHA_ENGINES and np.ptp(alphas) != 0:
        raise EngineError(f"{kind} requires an identical scalar step-size")
    for slot in ENGINE_WEIGHTS[kind]:
        if slot == "A" and (A is None or A.kind != wt.ROW):
            raise EngineError(f"{kind} needs a row-stochastic matrix A")
        if slot == "B" and (B is None or B.kind != wt.COLUMN):
            raise EngineError(f"{kind} needs a column-stochastic matrix B")
        if slot == "W":
            if W is None or W.kind != wt.DOUBLY:
                raise EngineError(f"{kind} needs a doubly-stochastic matrix W")
            if kind == "extra" and not np.allclose(W.entries, W.entries.T, atol=0):
                raise EngineError("extra requires a symmetric W")
    if kind == "extra" and W_tilde is None:
        W_tilde = (np.eye(n) + W.entries) / 2.0
    return EngineConfig(kind, alphas, betas, A=A, B=B, W=W, W_tilde=W_tilde)


@dataclass(frozen=True)
class AlgorithmState:
    """Stacked per-agent state; unused fields stay None for a given engine."""

    x: np.ndarray                 # n x p current estimates
    x_prev: np.ndarray = None     # n x p previous estimates
    y: np.ndarray = None          # n x p gradient tracker
    grads: np.ndarray = None      # cached local gradients at x
    grads_prev: np.ndarray = None  # cached local gradients at x_prev
    z: np.ndarray = None          # transformed/scaled estimates
    w: np.ndarray = None          # n-vector eigenvector estimate
    V: np.ndarray = None          # n x n eigenvector-estimate matrix
    k: int = 0


def _check_shapes(x0, n, p):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n, p):
        raise EngineError(f"x0 must have shape ({n}, {p}), got {x0.shape}")
    return x0


def init_state(cfg, suite, x0):
    """Bootstrap conventions: x_prev = 0, y_0 = local gradients at x_0."""
    kind = cfg.kind
    if kind in ("gd", "heavy_ball"):
        x0 = _check_shapes(x0, 1, suite.p)
        return AlgorithmState(x=x0, x_prev=np.zeros_like(x0))
    x0 = _check_shapes(x0, suite.n, suite.p)
    grads = suite.stacked_gradient(x0)
    if kind in ("abm", "ab", "ds_tracking"):
        return AlgorithmState(
            x=x0, x_prev=np.zeros_like(x0), y=grads.copy(), grads=grads
        )
    if kind in ("extra", "ab_extra"):
        # priming step happens on the first step call
        return AlgorithmState(x=x0, grads=grads)
    if kind == "addopt":
        return AlgorithmState(
            x=x0, y=grads.copy(), grads=grads, z=x0.copy(),
            w=np.ones(suite.n),
        )
    if kind == "frost":
        return AlgorithmState(
            x=x0, y=grads.copy(), grads=grads, V=np.eye(suite.n)
        )
    if kind == "transformed_exact":
        scale = suite.n * cfg.A.pi_r
        return AlgorithmState(
            x=x0, y=grads.copy(), grads=grads, z=scale[:, None] * x0
        )
    raise EngineError(f"unknown engine kind {kind!r}")


def abm_step(state, cfg, suite):
    """Heavy-ball gradient tracking with row/column-stochastic weights."""
    a = cfg.A.entries
    b = cfg.B.entries
    x_new = (
        a @ state.x
        - cfg.alphas[:, None] * state.y
        + cfg.betas[:, None] * (state.x - state.x_prev)
    )
    grads_new = suite.stacked_gradient(x_new)
    y_new = b @ state.y + grads_new - state.grads
    return replace(
        state, x=x_new, x_prev=state.x, y=y_new, grads=grads_new, k=state.k + 1
    )


def ab_step(state, cfg, suite):
    """Gradient tracking without momentum; same update with beta = 0."""
    if np.any(cfg.betas != 0):
        cfg = replace(cfg, betas=np.zeros_like(cfg.betas))
    return abm_step(state, cfg, suite)


def ds_tracking_step(state, cfg, suite):
    """Doubly-stochastic gradient tracking (Aug-DGM / DIGing updates)."""
    w = cfg.W.entries
    x_new = w @ state.x - cfg.alphas[:, None] * state.y
    grads_new = suite.stacked_gradient(x_new)
    y_new = w @ state.y + grads_new - state.grads
    return replace(
        state, x=x_new, x_prev=state.x, y=y_new, grads=grads_new, k=state.k + 1
    )


def extra_step(state, cfg, suite):
    """EXTRA: two-history update with symmetric doubly-stochastic weights."""
    w = cfg.W.entries
    alpha = cfg.alphas[0]
    if state.k == 0:
        x_new = w @ state.x - alpha * state.grads
    else:
        x_new = (
            state.x + w @ state.x
            - cfg.W_tilde @ state.x_prev
            - alpha * (state.grads - state.grads_prev)
        )
    grads_new = suite.stacked_gradient(x_new)
    return replace(
        state, x=x_new, x_prev=state.x,
        grads=grads_new, grads_prev=state.grads, k=state.k + 1,
    )


def ab_extra_form_step(state, cfg, suite):
    """Gradient tracking rewritten as a two-history EXTRA-style recursion.

    Produces the same x-sequence as ab_step under an identical scalar
    step-size; the first call performs one ab_step to align histories.
    """
    a = cfg.A.entries
    b = cfg.B.entries
    alpha = cfg.alphas[0]
    if state.k == 0:
        x_new = a @ state.x - alpha * state.grads  # y_0 = local gradients
    else:
        x_new = (
            (a + b) @ state.x
            - b @ (a @ state.x_prev)
            - alpha * (state.grads - state.grads_prev)
        )
    grads_new = suite.stacked_gradient(x_new)
    return replace(
        state, x=x_new, x_prev=state.x,
        grads=grads_new, grads_prev=state.grads, k=state.k + 1,
    )


def addopt_step(state, cfg, suite):
    """Column-stochastic tracking with eigenvector estimation (ADD-OPT style).

    The same column-stochastic matrix drives the scaled state, the
    eigenvector estimate, and the tracker; each agent divides by its own
    estimated Perron component.
    """
    b = cfg.B.entries
    z_new = b @ state.z - cfg.alphas[:, None] * state.y
    w_new = b @ state.w
    if np.any(w_new <= EIGEN_ESTIMATE_FLOOR):
        raise EngineError("eigenvector estimate degenerated to zero")
    x_new = z_new / w_new[:, None]
    grads_new = suite.stacked_gradient(x_new)
    y_new = b @ state.y + grads_new - state.grads
    return replace(
        state, x=x_new, x_prev=state.x, y=y_new, grads=grads_new,
        z=z_new, w=w_new, k=state.k + 1,
    )


def frost_step(state, cfg, suite):
    """Row-stochastic tracking with eigenvector estimation (FROST style).

    Each agent i runs V_{k+1} = A V_k from V_0 = I and scales its local
    gradient by the diagonal entry [V_k]_ii, which converges to the i-th
    left-Perron component of A.
    """
    a = cfg.A.entries
    x_new = a @ state.x - cfg.alphas[:, None] * state.y
    v_new = a @ state.V
    d_new = np.diag(v_new)
    if np.any(d_new <= EIGEN_ESTIMATE_FLOOR):
        raise EngineError("eigenvector estimate degenerated to zero")
    grads_new = suite.stacked_gradient(x_new) / d_new[:, None]
    y_new = a @ state.y + grads_new - state.grads
    return replace(
        state, x=x_new, x_prev=state.x, y=y_new, grads=grads_new,
        V=v_new, k=state.k + 1,
    )


def transformed_ab_exact_step(state, cfg, suite):
    """Column-stochastic-only rewrite of gradient tracking with the exact
    left-Perron scaling of A (no eigenvector estimation)."""
    scale = suite.n * cfg.A.pi_r
    b_t = scale[:, None] * cfg.A.entries / scale[None, :]
    alpha = cfg.alphas[0]
    z_new = b_t @ state.z - alpha * (scale[:, None] * state.y)
    x_new = z_new / scale[:, None]
    grads_new = suite.stacked_gradient(x_new)
    y_new = cfg.B.entries @ state.y + grads_new - state.grads
    return replace(
        state, x=x_new, x_prev=state.x, y=y_new, grads=grads_new,
        z=z_new, k=state.k + 1,
    )


def centralized_gd_step(x, alpha, suite):
    return x - alpha * suite.global_gradient(x)


def centralized_hb_step(x, x_prev, alpha, beta, suite):
    x_new = x - alpha * suite.global_gradient(x) + beta * (x - x_prev)
    return x_new, x


def polyak_parameters(mu, lip):
    """Heavy-ball defaults: alpha = 4/(sqrt(l)+sqrt(mu))^2 and the squared
    local accelerated rate as momentum."""
    alpha = 4.0 / (np.sqrt(lip) + np.sqrt(mu)) ** 2
    q = lip / mu
    beta = ((np.sqrt(q) - 1.0) / (np.sqrt(q) + 1.0)) ** 2
    return alpha, beta


def _gd_step(state, cfg, suite):
    x_new = centralized_gd_step(state.x[0], cfg.alphas[0], suite)
    return replace(state, x=x_new[None, :], x_prev=state.x, k=state.k + 1)


def _hb_step(state, cfg, suite):
    x_new, _ = centralized_hb_step(
        state.x[0], state.x_prev[0], cfg.alphas[0], cfg.betas[0], suite
    )
    return replace(state, x=x_new[None, :], x_prev=state.x, k=state.k + 1)


STEP_FUNCTIONS = {
    "abm": abm_step,
    "ab": ab_step,
    "ds_tracking": ds_tracking_step,
    "extra": extra_step,
    "ab_extra": ab_extra_form_step,
    "addopt": addopt_step,
    "frost": frost_step,
    "transformed_exact": transformed_ab_exact_step,
    "gd": _gd_step,
    "heavy_ball": _hb_step,
}


def tracking_error(state, suite):
    """Norm of sum_i y_i - sum_i grad f_i(x_i); zero in exact arithmetic
    for the gradient-tracking engines."""
    return float(np.linalg.norm(state.y.sum(axis=0) - state.grads.sum(axis=0)))


def step_condition_lambda(alphas, pi_r, pi_c, n, mu, lip):
    """Admissibility of the Perron-weighted effective step and its
    centralized contraction factor.

    s = pi_r^T diag(alpha) pi_c must lie in (0, 2/(n l)); the factor is
    max(|1 - mu n s|, |1 - l n s|).
    """
    alphas = np.asarray(alphas, dtype=float)
    s = float(pi_r @ (alphas * pi_c))
    ok = 0.0 < s < 2.0 / (n * lip)
    lam = max(abs(1.0 - mu * n * s), abs(1.0 - lip * n * s))
    return ok, lam


def run(cfg, suite, x0, max_iter, stop_residual=0.0):
    """Iterate an engine, recording the average residual per iteration.

    Stops at max_iter, below stop_residual, or on divergence (non-finite
    state or residual above 1e12, flagged in trace.meta rather than
    raised so that parameter searches can continue past unstable points).
    """
    x_star = suite.minimizer()
    state = init_state(cfg, suite, x0)
    step = STEP_FUNCTIONS[cfg.kind]
    trace = Trace(meta={
        "engine": cfg.kind,
        "config": cfg.digest(),
        "termination": "max_iter",
    })
    track = cfg.kind in TRACKING_ENGINES
    t0 = time.perf_counter()

    def record(st):
        res = average_residual(st.x, x_star)
        te = tracking_error(st, suite) if track else None
        trace.append(st.k, res, te, time.perf_counter() - t0)
        return res

    res = record(state)
    if res < stop_residual:
        trace.meta["termination"] = "threshold"
        return trace
    for _ in range(max_iter):
        state = step(state, cfg, suite)
        if not np.all(np.isfinite(state.x)):
            trace.append(state.k, float("inf"), None,
                         time.perf_counter() - t0)
            trace.meta["termination"] = "diverged"
            return trace
        res = record(state)
        if res > DIVERGENCE_RESIDUAL:
            trace.meta["termination"] = "diverged"
            return trace
        if res < stop_residual:
            trace.meta["termination"] = "threshold"
            return trace
    return trace


def tune_parameters(kind, suite, x0, alpha_grid, beta_grid, max_iter,
                    threshold, **matrices):
    """Grid search minimizing iterations to the residual threshold.

    Ties break toward smaller alpha, then smaller beta. Returns
    (alpha*, beta*, iterations*) with iterations* None when no grid point
    reaches the threshold.
    """
    from .analysis import iterations_to_threshold

    best = (None, None, None)
    best_iters = float("inf")
    for alpha in alpha_grid:
        for beta in beta_grid:
            try:
                cfg = make_config(kind, suite.n, alpha, beta, **matrices)
                trace = run(cfg, suite, x0, max_iter, threshold)
            except EngineError:
                continue
            if trace.diverged:
                continue
            iters = iterations_to_threshold(trace, threshold)
            if iters is not None and iters < best_iters:
                best_iters = iters
                best = (float(alpha), float(beta), iters)
    return best
