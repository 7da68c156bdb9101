"""Primal-dual reconstruction with linesearch.

Solves::

    min_{u >= 0, v}  1/2 sum_{c,p} ||F_p u_c - b_{c,p}||^2 + lam * sum_s ||v_s||_{1,*}
    s.t.             sum_s L_s^* v_s^c = D u_c   for every contrast c

as the saddle point problem with primal ``x = (u, v)``, dual ``y = (r, h)``
and ``K = [[F, 0], [-D, L^*]]``, using the Malitsky-Pock primal-dual method
whose step ``tau`` grows every iteration and is backtracked until the dual
difference satisfies ``sqrt(beta) tau ||K^* dy|| <= delta ||dy||``.
"""
from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft

from .operators import (
    GRIDS,
    encode,
    encode_adjoint_per_coil,
    grad,
    grad_adjoint,
    interp_adjoint_sum,
    interp_all,
)
from .prox import (
    field_set_nuclear_norms,
    project_nonneg,
    singular_values_2xn,
    prox_r,
    threshold_field_set,
    update_h,
)

logger = logging.getLogger(__name__)

LINESEARCH_NORMS = ("blockwise", "operator")


@dataclass
class SolverParams:
    lam: float = 7e-5
    beta: float = 4e-5
    tau0: float = 1.0
    mu: float = 0.7
    delta: float = 0.99
    theta0: float = 1.0
    max_iters: int = 300
    rel_tol: float = 1e-6
    max_backtracks: int = 50
    # "blockwise": per-coil F_p^* dr and per-grid L_s dh stacked into one
    # vector; "operator": the full K^* dy including the -D^* dh coupling.
    linesearch_norm: str = "operator"

    def validate(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.theta0 > 0:
            raise ValueError(f"theta0 must be positive, got {self.theta0}")
        if self.max_iters < 1 or self.max_backtracks < 0:
            raise ValueError("max_iters must be >= 1 and max_backtracks >= 0")
        if self.rel_tol < 0:
            raise ValueError(f"rel_tol must be nonnegative, got {self.rel_tol}")
        if self.linesearch_norm not in LINESEARCH_NORMS:
            raise ValueError(f"linesearch_norm must be one of {LINESEARCH_NORMS}")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class SolverState:
    u: np.ndarray  # (N, n, n)
    v: np.ndarray  # (4, N, 2, n, n)
    r: np.ndarray  # (N, P, n, n)
    h: np.ndarray  # (N, 2, n, n)
    tau: float
    theta: float
    iteration: int = 0


@dataclass
class Trace:
    objective: list = field(default_factory=list)
    residual: list = field(default_factory=list)  # per-contrast constraint residual norms
    backtracks: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)

    def to_dict(self):
        return {
            "objective": [float(x) for x in self.objective],
            "residual": [[float(x) for x in row] for row in self.residual],
            "backtracks": [int(x) for x in self.backtracks],
            "tau": [float(x) for x in self.tau],
            "rel_change": [float(x) for x in self.rel_change],
        }


@dataclass
class ReconResult:
    u: np.ndarray
    trace: Trace
    reason: str  # "max_iters" or "rel_tol"
    state: SolverState
    params: SolverParams

    @property
    def iterations(self):
        return self.state.iteration


class LinesearchError(RuntimeError):
    """Raised when the linesearch needs more than ``max_backtracks`` reductions."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


def _norm(x):
    return math.sqrt(float(np.vdot(x, x).real))


def _check_problem(ksp, mask, sens):
    ksp, mask, sens = np.asarray(ksp), np.asarray(mask), np.asarray(sens)
    if ksp.ndim != 4:
        raise ValueError(f"k-space must be (N, P, n, n), got shape {ksp.shape}")
    N, P, n, m = ksp.shape
    if n != m:
        raise ValueError(f"k-space must be square, got {n}x{m}")
    if sens.shape != (P, n, n):
        raise ValueError(f"sensitivities {sens.shape} do not match k-space {ksp.shape}")
    if mask.shape != (n, n):
        raise ValueError(f"mask {mask.shape} does not match k-space {ksp.shape}")
    return ksp, mask, sens


def constraint_residual(u, v):
    """Per-contrast ``||sum_s L_s^* v_s^c - D u_c||``."""
    res = interp_adjoint_sum(v) - grad(u)
    return np.sqrt(np.sum(np.abs(res) ** 2, axis=(-3, -2, -1)))


def objective(u, v, ksp, sens, mask, lam):
    """Reconstruction cost at ``(u, v)`` and the (unpenalised) constraint residuals.

    Returns:
        ``(value, residuals)`` with ``residuals`` the per-contrast norms of
        ``sum_s L_s^* v_s^c - D u_c``.
    """
    ksp, mask, sens = _check_problem(ksp, mask, sens)
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != (ksp.shape[0],) + ksp.shape[2:] or v.shape != (len(GRIDS), u.shape[0], 2) + u.shape[1:]:
        raise ValueError(f"u {u.shape} / v {v.shape} do not match k-space {ksp.shape}")
    data = 0.5 * float(np.sum(np.abs(encode(u, sens, mask) - ksp) ** 2))
    reg = lam * float(field_set_nuclear_norms(v).sum())
    return data + reg, constraint_residual(u, v)


@contextlib.contextmanager
def _fft_workers(workers):
    if workers is None:
        yield
    else:
        with scipy.fft.set_workers(workers if workers > 0 else -1):
            yield


def reconstruct(ksp, mask, sens, params=None, *, workers=None, record_objective=True, callback=None):
    """Jointly reconstruct all contrasts from undersampled multi-coil k-space.

    Args:
        ksp: zero-filled k-space ``(N, P, n, n)``, centred storage.
        mask: sampling mask ``(n, n)``.
        sens: coil maps ``(P, n, n)``.
        params: :class:`SolverParams`; defaults when omitted.
        workers: FFT thread count (``0`` = all cores, ``None`` = library default).
        record_objective: evaluate the cost every iteration (one extra encode).
        callback: called as ``callback(state)`` after every accepted iteration.

    Returns:
        :class:`ReconResult`.

    Raises:
        LinesearchError: a step needed more than ``params.max_backtracks``
            reductions; the exception carries the last accepted state.
    """
    params = (params or SolverParams()).validate()
    ksp, mask, sens = _check_problem(ksp, mask, sens)
    with _fft_workers(workers):
        return _run(ksp, mask, sens, params, record_objective, callback)


def _run(b, mask, sens, params, record_objective, callback):
    N, P, n, _ = b.shape
    lam, beta, mu, delta = params.lam, params.beta, params.mu, params.delta
    sqrt_beta = math.sqrt(beta)
    blockwise = params.linesearch_norm == "blockwise"

    fr_coils = np.zeros((N, P, n, n), dtype=np.complex128)  # F_p^* r per coil
    u = np.sum(encode_adjoint_per_coil(b, sens, mask), axis=1)
    state = SolverState(
        u=u,
        v=np.zeros((len(GRIDS), N, 2, n, n), dtype=np.complex128),
        r=np.zeros((N, P, n, n), dtype=np.complex128),
        h=np.zeros((N, 2, n, n), dtype=np.complex128),
        tau=params.tau0,
        theta=params.theta0,
    )
    lh = np.zeros((len(GRIDS), N, 2, n, n), dtype=np.complex128)  # L_s h per grid
    trace = Trace()
    reason = "max_iters"

    for k in range(params.max_iters):
        u, v, r, h, tau = state.u, state.v, state.r, state.h, state.tau
        u_new = project_nonneg(u - tau * (fr_coils.sum(axis=1) - grad_adjoint(h)))
        v_new = threshold_field_set(v - tau * lh, tau * lam)

        tau_new = tau * math.sqrt(1 + state.theta)
        du, dv = u_new - u, v_new - v
        for backtracks in range(params.max_backtracks + 1):
            theta_new = tau_new / tau
            u_bar = u_new + theta_new * du
            v_bar = v_new + theta_new * dv
            step = beta * tau_new
            r_new = prox_r(r, encode(u_bar, sens, mask), b, step)
            h_new = update_h(h, grad(u_bar), interp_adjoint_sum(v_bar), step)
            fr_new = encode_adjoint_per_coil(r_new, sens, mask)
            lh_new = interp_all(h_new)
            dr, dh = r_new - r, h_new - h
            d_fr, d_lh = fr_new - fr_coils, lh_new - lh
            if blockwise:
                kty_sq = _norm(d_fr) ** 2 + _norm(d_lh) ** 2
            else:
                kty_sq = _norm(d_fr.sum(axis=1) - grad_adjoint(dh)) ** 2 + _norm(d_lh) ** 2
            lhs = sqrt_beta * tau_new * math.sqrt(kty_sq)
            rhs = delta * math.sqrt(_norm(dr) ** 2 + _norm(dh) ** 2)
            if lhs <= rhs:
                break
            tau_new *= mu
        else:
            raise LinesearchError(
                f"linesearch exceeded {params.max_backtracks} backtracks at iteration {k}", state
            )

        norm_new = _norm(u_new)
        change = _norm(du)
        rel = change / norm_new if norm_new > 0 else (0.0 if change == 0 else math.inf)
        state = SolverState(u=u_new, v=v_new, r=r_new, h=h_new, tau=tau_new, theta=theta_new, iteration=k + 1)
        fr_coils, lh = fr_new, lh_new

        if record_objective:
            obj, res = objective(u_new, v_new, b, sens, mask, lam)
        else:
            obj, res = math.nan, constraint_residual(u_new, v_new)
        trace.objective.append(obj)
        trace.residual.append(res)
        trace.backtracks.append(backtracks)
        trace.tau.append(tau_new)
        trace.rel_change.append(rel)
        if callback is not None:
            callback(state)
        if rel < params.rel_tol:
            reason = "rel_tol"
            break

    logger.debug("reconstruct stopped after %d iterations (%s)", state.iteration, reason)
    return ReconResult(u=state.u, trace=trace, reason=reason, state=state, params=params)


@dataclass
class NRITVValue:
    value: float  # cost of the returned (feasible) field set
    residual: float  # ||sum_s L_s^* v_s - D u|| of the returned field set
    iterations: int
    converged: bool
    lower_bound: float = 0.0  # dual bound, value - lower_bound is the optimality gap
    raw_residual: float = 0.0  # residual of the last primal-dual iterate, before restoration
    v: np.ndarray = field(repr=False, default=None)

    @property
    def gap(self):
        return self.value - self.lower_bound

    def __float__(self):
        return self.value


def restore_feasibility(v, du):
    """Absorb the constraint residual into the identity-coupled components.

    The vertical grid's row component and the horizontal grid's column
    component enter the constraint unchanged, so adding the residual there
    makes ``sum_s L_s^* v_s = D u`` hold to rounding.
    """
    v = np.array(v, copy=True)
    res = du - interp_adjoint_sum(v)
    v[0, :, 0] += res[:, 0]
    v[1, :, 1] += res[:, 1]
    return v


def _dual_bound(h, lh, du):
    # -Re<Du, h> is a lower bound once every L_s h has pixel spectral norm <= 1.
    spec = singular_values_2xn(np.moveaxis(lh, (1, 2), (-1, -2)))[..., 0].max()
    scale = max(1.0, float(spec))
    return -float(np.vdot(h, du).real) / scale


def nritv_value(u, inner_iters=2000, tol=1e-10, *, beta=1.0, tau0=1.0, mu=0.7, delta=0.99, check_every=50):
    """Evaluate the joint isotropic regulariser of a contrast stack.

    Minimises ``sum_s sum_ij ||[v_s^1(i,j) ... v_s^N(i,j)]||_*`` subject to
    ``sum_s L_s^* v_s^c = D u_c`` with the same linesearch primal-dual scheme
    as :func:`reconstruct` (``u`` fixed, no data term).  The last iterate is
    made exactly feasible with :func:`restore_feasibility`, so ``value`` is the
    cost of a feasible field set and ``value - lower_bound`` bounds its
    distance to the optimum.  Iteration stops when that relative gap drops
    below ``tol``.

    Args:
        u: ``(N, n, n)`` or a single ``(n, n)`` image.

    Returns:
        :class:`NRITVValue`; ``converged`` is False when ``inner_iters`` ran
        out first.
    """
    u = np.asarray(u)
    if u.ndim == 2:
        u = u[None]
    if not np.all(np.isfinite(u)):
        raise ValueError("u must be finite")
    N, n, _ = u.shape
    du = grad(u).astype(np.complex128)
    v = np.zeros((len(GRIDS), N, 2, n, n), dtype=np.complex128)
    h = np.zeros((N, 2, n, n), dtype=np.complex128)
    if not np.any(du):
        return NRITVValue(0.0, 0.0, 0, True, v=v)
    lh = np.zeros_like(v)
    tau, theta = tau0, 1.0
    sqrt_beta = math.sqrt(beta)
    converged = False
    it = 0
    for it in range(1, inner_iters + 1):
        v_new = threshold_field_set(v - tau * lh, tau)
        dv = v_new - v
        tau_new = tau * math.sqrt(1 + theta)
        for _ in range(100):
            theta_new = tau_new / tau
            v_bar = v_new + theta_new * dv
            h_new = update_h(h, du, interp_adjoint_sum(v_bar), beta * tau_new)
            lh_new = interp_all(h_new)
            if sqrt_beta * tau_new * _norm(lh_new - lh) <= delta * _norm(h_new - h):
                break
            tau_new *= mu
        v, h, lh, tau, theta = v_new, h_new, lh_new, tau_new, theta_new
        if it % check_every == 0:
            value = float(field_set_nuclear_norms(restore_feasibility(v, du)).sum())
            if value - _dual_bound(h, lh, du) <= tol * value:
                converged = True
                break
    raw_residual = _norm(interp_adjoint_sum(v) - du)
    v = restore_feasibility(v, du)
    return NRITVValue(
        value=float(field_set_nuclear_norms(v).sum()),
        residual=_norm(interp_adjoint_sum(v) - du),
        iterations=it,
        converged=converged,
        lower_bound=_dual_bound(h, lh, du),
        raw_residual=raw_residual,
        v=v,
    )
