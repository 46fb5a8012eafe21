"""Stochastic encoder parametrization, criterion objectives, and optimization.

The encoder q(z|xhat) is a row-stochastic matrix obtained by a row-wise
softmax of an unconstrained logits matrix, so gradient descent never leaves
the feasible set. The objective for regularization strength lambda is

    L(theta) = -I_{t=1}(y; z) + lambda * R_{t=1}(theta),

where R is the criterion's regularizer: I(xhat;z) (bottleneck), I(e;z)
(independence), I(y;e|z) (sufficiency), or I(e;z|y) (separation), all
measured on the training split. Every information term is an alternating sum
of entropies of z-marginals, each linear in the encoder matrix, which gives
closed-form gradients (see _evaluate).

Optimization is plain Adam with per-iteration exact train/test cross-entropy
tracking; convergence is declared when the total variation of both metrics
over a trailing window falls below tolerance.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .core import Channel, JointTable
from .errors import NonFiniteLogits
from .infotheory import ordered_marginal

__all__ = [
    "CriterionKind",
    "EncoderParams",
    "OptimizerConfig",
    "OptimizationResult",
    "Trajectory",
    "TrajectoryPoint",
    "DEFAULT_INIT_SIGMA",
    "DEFAULT_N_LATENT",
    "init_params",
    "materialize",
    "objective",
    "gradient",
    "optimize",
    "sweep",
    "default_lambda_grid",
    "write_trajectory_csv",
]

DEFAULT_N_LATENT = 64
DEFAULT_INIT_SIGMA = 0.1

# exp(-709) underflows; this floor keeps logs finite where a probability has
# underflowed to exactly 0 (such entries always carry zero weight).
_LOG_TINY = 1e-300


def _slog(a: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(a, _LOG_TINY))


def _H(p: np.ndarray) -> float:
    return float(-(p * _slog(p)).sum())


class CriterionKind(enum.Enum):
    BOTTLENECK = "bottleneck"
    INDEPENDENCE = "independence"
    SUFFICIENCY = "sufficiency"
    SEPARATION = "separation"

    @classmethod
    def parse(cls, text: str) -> "CriterionKind":
        return cls(text.strip().lower())


@dataclass(frozen=True)
class EncoderParams:
    """Unconstrained logits; row i parametrizes q(z | xhat=i) via softmax."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.array(self.logits, dtype=np.float64)
        if logits.ndim != 2:
            raise NonFiniteLogits(f"logits must be a matrix, got shape {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise NonFiniteLogits("logits contain NaN or infinity")
        logits.setflags(write=False)
        object.__setattr__(self, "logits", logits)


def init_params(
    seed: int,
    sigma: float = DEFAULT_INIT_SIGMA,
    n_inputs: int = 20,
    n_latent: int = DEFAULT_N_LATENT,
) -> EncoderParams:
    """I.i.d. Gaussian(0, sigma^2) logits, deterministic per seed."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    return EncoderParams(rng.normal(0.0, sigma, size=(n_inputs, n_latent)))


def _softmax_rows(w: np.ndarray) -> np.ndarray:
    shifted = w - w.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def materialize(params: EncoderParams, input_name: str = "xhat",
                latent_name: str = "z") -> Channel:
    """Row-stochastic encoder channel q(z | xhat) from the logits."""
    table = _softmax_rows(params.logits)
    return Channel((input_name,), (latent_name, table.shape[1]), table)


class _TrainContext:
    """Reduced train/test arrays for one dataset view over (xhat, y, e, t).

    Environment states with zero training mass are dropped from the hot-loop
    arrays; a zero-mass state contributes nothing to any entropy, so every
    information quantity is unchanged.
    """

    def __init__(self, view: JointTable):
        train = view.condition({"t": 1})
        test = view.condition({"t": 0})
        pxe = ordered_marginal(train, ("xhat", "e"))
        live = pxe.sum(axis=0) > 0
        self.pxy = ordered_marginal(train, ("xhat", "y"))           # (X, Y)
        self.pxe = pxe[:, live]                                      # (X, E')
        pxye = ordered_marginal(train, ("xhat", "y", "e"))[:, :, live]
        self.pxs = pxye.reshape(pxye.shape[0], -1)                   # (X, Y*E')
        self.p1 = self.pxy.sum(axis=1)                               # (X,)
        self.pxy_test = ordered_marginal(test, ("xhat", "y"))        # (X, Y)
        self.h_y = _H(self.pxy.sum(axis=0))
        self.h_e = _H(self.pxe.sum(axis=0))
        self.h_x = _H(self.p1)
        self.h_ey = _H(self.pxs.sum(axis=0))
        self.n_inputs = self.pxy.shape[0]


# coefficients of the z-dependent entropies (Hz, Hyz, Hez, Hyez, Hxz) in R
_REG_COEFS = {
    CriterionKind.BOTTLENECK: (1.0, 0.0, 0.0, 0.0, -1.0),
    CriterionKind.INDEPENDENCE: (1.0, 0.0, -1.0, 0.0, 0.0),
    CriterionKind.SUFFICIENCY: (-1.0, 1.0, 1.0, -1.0, 0.0),
    CriterionKind.SEPARATION: (0.0, 1.0, 0.0, -1.0, 0.0),
}


def _evaluate(ctx: _TrainContext, criterion: CriterionKind, lam: float,
              w: np.ndarray, want_grad: bool):
    """Objective, metrics, and (optionally) the exact logits gradient.

    Every z-marginal is linear in the encoder matrix Q: P(s, z) is the matmul
    A.T @ Q of a fixed train-split joint A[x, s] with Q. Hence for each
    entropy term, dH/dQ[x, z] = -A[x, s] (log P(s, z) + 1) summed over s, and
    the softmax chain rule maps dL/dQ to logits space row by row.
    """
    q = _softmax_rows(w)
    pz = ctx.p1 @ q                                     # (Z,)
    pyz = ctx.pxy.T @ q                                 # (Y, Z)
    log_pz, log_pyz = _slog(pz), _slog(pyz)
    h_z = float(-(pz * log_pz).sum())
    h_yz = float(-(pyz * log_pyz).sum())
    pred_info = ctx.h_y + h_z - h_yz

    c_hz, c_hyz, c_hez, c_hyez, c_hxz = _REG_COEFS[criterion]
    reg = c_hz * h_z + c_hyz * h_yz
    log_pez = log_psz = log_q = None
    if c_hez:
        pez = ctx.pxe.T @ q
        log_pez = _slog(pez)
        reg += c_hez * float(-(pez * log_pez).sum())
    if c_hyez:
        psz = ctx.pxs.T @ q
        log_psz = _slog(psz)
        reg += c_hyez * float(-(psz * log_psz).sum())
    if c_hxz:
        pxz = ctx.p1[:, None] * q
        log_q = _slog(q)
        h_xz = float(-(pxz * (_slog(ctx.p1)[:, None] + log_q)).sum())
        reg += c_hxz * h_xz
    if criterion is CriterionKind.BOTTLENECK:
        reg += ctx.h_x
    elif criterion is CriterionKind.INDEPENDENCE:
        reg += ctx.h_e
    elif criterion is CriterionKind.SEPARATION:
        reg += ctx.h_ey - ctx.h_y
    reg = max(reg, 0.0)
    loss = -pred_info + lam * reg

    # induced model with the train-optimal latent classifier
    clf = (pyz / np.maximum(pz, _LOG_TINY)).T           # (Z, Y)
    model = q @ clf                                     # (X, Y)
    log_model = _slog(model)
    ce_train = float(-(ctx.pxy * log_model).sum())
    ce_test = float(-(ctx.pxy_test * log_model).sum())

    if not want_grad:
        return loss, pred_info, reg, ce_train, ce_test, None

    # combined coefficient of each entropy term in L
    a_hz = -1.0 + lam * c_hz
    a_hyz = 1.0 + lam * c_hyz
    g = np.zeros_like(w)
    if a_hz:
        g -= np.outer(ctx.p1, a_hz * (log_pz + 1.0))
    if a_hyz:
        g -= a_hyz * (ctx.pxy @ (log_pyz + 1.0))
    if lam and c_hez:
        g -= (lam * c_hez) * (ctx.pxe @ (log_pez + 1.0))
    if lam and c_hyez:
        g -= (lam * c_hyez) * (ctx.pxs @ (log_psz + 1.0))
    if lam and c_hxz:
        g -= (lam * c_hxz) * (ctx.p1[:, None] * (_slog(ctx.p1)[:, None] + log_q + 1.0))
    # softmax chain rule per row
    grad = q * (g - (q * g).sum(axis=1, keepdims=True))
    return loss, pred_info, reg, ce_train, ce_test, grad


def _context(dataset_joint: JointTable) -> _TrainContext:
    # accept either the raw (e,d,y,c,t) joint or the (xhat,y,e,t) view
    if "xhat" not in dataset_joint.names:
        from .datasets import sufficient_statistic_view

        dataset_joint = sufficient_statistic_view(dataset_joint)
    return _TrainContext(dataset_joint)


def objective(params: EncoderParams, dataset_joint: JointTable,
              criterion: CriterionKind, lam: float) -> float:
    """L(theta) = -I_{t=1}(y;z) + lambda * R_{t=1}(theta), in nats."""
    ctx = _context(dataset_joint)
    loss, *_ = _evaluate(ctx, criterion, lam, params.logits, want_grad=False)
    return loss


def gradient(params: EncoderParams, dataset_joint: JointTable,
             criterion: CriterionKind, lam: float) -> np.ndarray:
    """Exact dL/dlogits, same shape as the logits matrix."""
    ctx = _context(dataset_joint)
    *_, grad = _evaluate(ctx, criterion, lam, params.logits, want_grad=True)
    return grad


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iterations: int = 200_000
    convergence_tolerance: float = 1e-4
    convergence_window: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.convergence_window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class OptimizationResult:
    params: EncoderParams
    lam: float
    criterion: CriterionKind
    train_ce: float
    test_ce: float
    regularizer_value: float
    predictive_info: float
    objective_value: float
    iterations_run: int
    converged: bool
    history: np.ndarray  # (iterations, 2): train CE, test CE per iteration


class _TotalVariationWindow:
    """Running sum of |successive differences| over a trailing window."""

    def __init__(self, window: int):
        self.window = window
        self.diffs = np.zeros(window)
        self.pos = 0
        self.count = 0
        self.total = 0.0
        self.last = None

    def push(self, value: float) -> None:
        if self.last is not None:
            step = abs(value - self.last)
            self.total += step - self.diffs[self.pos]
            self.diffs[self.pos] = step
            self.pos = (self.pos + 1) % self.window
            self.count += 1
        self.last = value

    @property
    def full(self) -> bool:
        return self.count >= self.window


def optimize(dataset_joint: JointTable, criterion: CriterionKind, lam: float,
             config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Adam descent from a fresh Gaussian init until both CE metrics settle.

    Convergence: the total variation (sum of absolute successive differences)
    of train and of test cross-entropy over the trailing window is below
    tolerance for both metrics. Hitting max_iterations returns the best
    objective value seen, flagged converged=False; it does not raise.
    """
    ctx = _context(dataset_joint)
    w = np.array(init_params(config.seed, n_inputs=ctx.n_inputs).logits)
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    tv_train = _TotalVariationWindow(config.convergence_window)
    tv_test = _TotalVariationWindow(config.convergence_window)
    history = np.empty((config.max_iterations, 2))
    best_loss = math.inf
    best = None
    converged = False
    iterations = 0
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.epsilon
    for it in range(config.max_iterations):
        loss, pred_info, reg, ce_train, ce_test, grad = _evaluate(
            ctx, criterion, lam, w, want_grad=True
        )
        iterations = it + 1
        history[it] = (ce_train, ce_test)
        if loss < best_loss:
            best_loss = loss
            best = (w.copy(), loss, pred_info, reg, ce_train, ce_test)
        tv_train.push(ce_train)
        tv_test.push(ce_test)
        if (
            tv_train.full
            and tv_train.total < config.convergence_tolerance
            and tv_test.total < config.convergence_tolerance
        ):
            converged = True
            final = (w.copy(), loss, pred_info, reg, ce_train, ce_test)
            break
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        t = it + 1
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        w -= lr * m_hat / (np.sqrt(v_hat) + eps)
    if not converged:
        final = best
    w_out, loss, pred_info, reg, ce_train, ce_test = final
    return OptimizationResult(
        params=EncoderParams(w_out),
        lam=lam,
        criterion=criterion,
        train_ce=ce_train,
        test_ce=ce_test,
        regularizer_value=reg,
        predictive_info=pred_info,
        objective_value=loss,
        iterations_run=iterations,
        converged=converged,
        history=history[:iterations].copy(),
    )


@dataclass(frozen=True)
class TrajectoryPoint:
    lam: float
    train_ce: float
    test_ce: float
    regularizer_value: float
    predictive_info: float
    iterations_run: int
    converged: bool


@dataclass(frozen=True)
class Trajectory:
    criterion: CriterionKind
    points: tuple[TrajectoryPoint, ...]


def default_lambda_grid(criterion: CriterionKind) -> tuple[float, ...]:
    """{0} plus 25 log-spaced strengths; the bottleneck tops out at 10."""
    if criterion is CriterionKind.BOTTLENECK:
        lo, hi = 1e-3, 10.0
    else:
        lo, hi = 1e-2, 1e6
    return (0.0,) + tuple(float(x) for x in np.geomspace(lo, hi, 25))


def derive_seed(base: int, index: int) -> int:
    """Stable per-point seed for independent sweep initializations."""
    return int(np.random.SeedSequence([base, index]).generate_state(1)[0])


def _sweep_point(args) -> OptimizationResult:
    dataset_joint, criterion, lam, config = args
    return optimize(dataset_joint, criterion, lam, config)


def sweep(dataset_joint: JointTable, criterion: CriterionKind,
          lambda_grid: tuple[float, ...] | None = None,
          config: OptimizerConfig = OptimizerConfig()) -> Trajectory:
    """One fresh optimization per lambda, in grid order.

    The grid must be sorted and nonnegative. Points run serially unless the
    SHIFTLAB_THREADS environment variable asks for a process pool; results
    are identical either way since each point derives its own seed.
    """
    grid = default_lambda_grid(criterion) if lambda_grid is None else tuple(lambda_grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(x < 0 for x in grid) or list(grid) != sorted(grid):
        raise ValueError("lambda grid must be sorted and nonnegative")
    jobs = [
        (dataset_joint, criterion, lam, replace(config, seed=derive_seed(config.seed, i)))
        for i, lam in enumerate(grid)
    ]
    workers = int(os.environ.get("SHIFTLAB_THREADS", "1"))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    points = tuple(
        TrajectoryPoint(
            lam=r.lam,
            train_ce=r.train_ce,
            test_ce=r.test_ce,
            regularizer_value=r.regularizer_value,
            predictive_info=r.predictive_info,
            iterations_run=r.iterations_run,
            converged=r.converged,
        )
        for r in results
    )
    return Trajectory(criterion=criterion, points=points)


def write_trajectory_csv(trajectory: Trajectory, path: str) -> None:
    """Header lambda,train_ce,test_ce,regularizer,predictive_info,iterations,converged."""
    lines = ["lambda,train_ce,test_ce,regularizer,predictive_info,iterations,converged"]
    for p in trajectory.points:
        lines.append(
            f"{p.lam:.9g},{p.train_ce:.9g},{p.test_ce:.9g},"
            f"{p.regularizer_value:.9g},{p.predictive_info:.9g},"
            f"{p.iterations_run},{str(p.converged).lower()}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
