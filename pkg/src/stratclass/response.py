"""Strategic responses of Agents to a published score model.

Four strategies map features x to manipulated features z:

``identity``      z = x
``linear-exact``  closed-form best response to a linear model under
                  Euclidean cost (move onto the boundary if that costs < 2)
``gradient``      gradient ascent on h(z) - c(x, z) starting from x
``lagrangian``    min_z max_{lam, mu >= 0} of
                  c(x,z) - lam (h(z) - eps) + mu (c(x,z) - 2)
                  by projected (proximal) extragradient ascent-descent

Every strategy's output goes through :func:`post_check`, which keeps z
only if it is rational: x was classified negative, z is classified
positive, and the exact cost is strictly below 2.

All solvers run on a whole batch at once; each row keeps its own
convergence state, so a batch result equals the row-by-row result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .costs import CostFn, cost_prox
from .models import LinearModel, ScoreModel
from .numerics import make_rng, worker_seed

log = logging.getLogger(__name__)

IDENTITY = "identity"
LINEAR_EXACT = "linear-exact"
GRADIENT = "gradient"
LAGRANGIAN = "lagrangian"
STRATEGIES = (IDENTITY, LINEAR_EXACT, GRADIENT, LAGRANGIAN)

# Rational budget: a positive label is worth at most 2 utility.
BUDGET = 2.0

# adaptive extragradient step control
_NU = 0.9
_GROW = 1.2
_MIN_SCALE = 1e-8


@dataclass(frozen=True)
class ResponseConfig:
    eps: float = 1e-3
    max_iters: int = 2000
    step_z: float = 5e-2
    step_dual: float = 5e-1
    tol: float = 1e-8
    restarts: int = 0
    restart_radius: float = 0.5
    seed: int = 0
    # augmented-Lagrangian penalty (0 gives the plain Lagrangian)
    penalty: float = 10.0
    # scale lam step and penalty by 1/(running max ||grad h||^2)
    precondition: bool = True
    grad_floor: float = 1e-2
    # "normalized" (w / ||w||) or "printed" (raw w) closed form
    linear_form: str = "normalized"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not (self.step_z > 0 and self.step_dual > 0):
            raise ValueError("step sizes must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if self.penalty < 0:
            raise ValueError("penalty must be nonnegative")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")
        if self.linear_form not in ("normalized", "printed"):
            raise ValueError(f"unknown linear_form {self.linear_form!r}")


@dataclass(frozen=True)
class ResponseStrategy:
    tag: str
    config: ResponseConfig = field(default_factory=ResponseConfig)

    def __post_init__(self):
        if self.tag not in STRATEGIES:
            raise ValueError(f"unknown response strategy {self.tag!r}; expected one of {STRATEGIES}")

    def check_model(self, model: ScoreModel) -> None:
        if self.tag == LINEAR_EXACT and not isinstance(model, LinearModel):
            raise ValueError("linear-exact response only applies to linear models")


@dataclass
class DualState:
    """Iterate of the Lagrangian solver; arrays are row-aligned with the batch."""

    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    iters: np.ndarray
    converged: np.ndarray
    failed: np.ndarray


@dataclass(frozen=True)
class Diagnostic:
    index: int
    strategy: str
    message: str


@dataclass
class KktResiduals:
    stationarity: np.ndarray
    primal_feas_h: np.ndarray
    primal_feas_c: np.ndarray
    comp_slack_lam: np.ndarray
    comp_slack_mu: np.ndarray

    def max(self) -> float:
        return float(
            max(
                np.max(v, initial=0.0)
                for v in (
                    self.stationarity,
                    self.primal_feas_h,
                    self.primal_feas_c,
                    self.comp_slack_lam,
                    self.comp_slack_mu,
                )
            )
        )


def _rows(x):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    return (X[None, :] if single else X), single


def _out(Z, single):
    return Z[0] if single else Z


# -- post-response check -----------------------------------------------------


def post_check(model: ScoreModel, cfn: CostFn, x, z):
    """Keep z only where it is a rational move; otherwise fall back to x."""
    X, single = _rows(x)
    Z, _ = _rows(z)
    if X.shape != Z.shape:
        raise ValueError(f"shape mismatch: x {X.shape} vs z {Z.shape}")
    ok = np.all(np.isfinite(Z), axis=1)
    Zs = np.where(ok[:, None], Z, X)
    ok &= model.score(X) < 0
    ok &= model.score(Zs) >= 0
    ok &= np.asarray(cfn(X, Zs)) < BUDGET
    return _out(np.where(ok[:, None], Z, X), single)


# -- identity ------------------------------------------------------------------


def respond_identity(x):
    return np.array(x, dtype=np.float64, copy=True)


# -- closed form (linear, Euclidean) ----------------------------------------------


def respond_linear_exact(model: LinearModel, x, form: str = "normalized", cfn: CostFn | None = None):
    """Closed-form best response to a linear model.

    With w_hat = w/||w|| and margin m = h(x)/||w||, points with -2 < m < 0
    move to x - w_hat * m, which lies on h = 0. ``form="printed"`` uses the
    unnormalised update x - w h(x)/||w|| for comparison; it only reaches
    the boundary when ||w|| = 1.
    """
    X, single = _rows(x)
    cfn = cfn or CostFn()
    w = model.w
    W = float(np.linalg.norm(w))
    if W == 0.0:
        raise ValueError("linear-exact response undefined for a zero weight vector")
    h = model.score(X)
    if form == "printed":
        move = (h >= -BUDGET) & (h < 0)
        Z = X - np.outer(h / W, w)
    elif form == "normalized":
        w_hat = w / W
        m = h / W
        move = (m > -BUDGET) & (m < 0)
        Z = X - np.outer(m, w_hat)
        # rounding can leave h(z) a hair below zero; nudge along w_hat
        for _ in range(8):
            short = move & (model.score(Z) < 0)
            if not short.any():
                break
            hz = model.score(Z[short])
            Z[short] += np.outer(np.maximum(-hz / W, 1e-15) * 2.0, w_hat)
    else:
        raise ValueError(f"unknown form {form!r}")
    Z = np.where(move[:, None], Z, X)
    return _out(post_check(model, cfn, X, Z), single)


# -- gradient relaxation -------------------------------------------------------------


def respond_gradient(model: ScoreModel, cfn: CostFn, x, cfg: ResponseConfig = ResponseConfig(),
                     diagnostics: list | None = None):
    """Gradient ascent on h(z) - c(x, z) from z = x, then post_check."""
    X, single = _rows(x)
    Z = X.copy()
    active = np.ones(len(X), dtype=bool)
    failed = np.zeros(len(X), dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.max_iters):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            za, xa = Z[idx], X[idx]
            step = cfg.step_z * (model.input_grad(za) - cfn.grad_z(xa, za))
            znew = za + step
            bad = ~np.all(np.isfinite(znew), axis=1)
            if bad.any():
                failed[idx[bad]] = True
                active[idx[bad]] = False
            good = idx[~bad]
            Z[good] = znew[~bad]
            done = np.linalg.norm(step[~bad], axis=1) < cfg.tol
            active[good[done]] = False
    _report_failures(failed, GRADIENT, diagnostics)
    Z[failed] = X[failed]
    return _out(post_check(model, cfn, X, Z), single)


# -- Lagrangian dual -------------------------------------------------------------------


def _smooth_fields(model, cfn, X, Z, lam, mu, eps, rho_h, rho_c):
    """Pieces of the Lagrangian field at the given rows.

    Returns (lam_eff * grad h, mu_eff, dL/dlam, dL/dmu, ||grad h||^2) where
    lam_eff = max(0, lam + rho_h (eps - h)) and mu_eff = max(0, mu + rho_c (c - 2))
    are the penalty-shifted multipliers of the augmented Lagrangian. They
    equal lam and mu at any KKT point.
    """
    h, gh = model.score_and_input_grad(Z)
    c = np.asarray(cfn(X, Z))
    lam_eff = np.maximum(lam + rho_h * (eps - h), 0.0)
    mu_eff = np.maximum(mu + rho_c * (c - BUDGET), 0.0)
    return lam_eff[:, None] * gh, mu_eff, eps - h, c - BUDGET, np.sum(gh * gh, axis=1)


def solve_lagrangian(model: ScoreModel, cfn: CostFn, x, cfg: ResponseConfig = ResponseConfig(),
                     z0=None) -> DualState:
    """Projected extragradient ascent-descent on the Lagrangian.

    One iteration from w = (z, lam, mu) with steps (ez, el, em):

        z~   = prox[ez (1 + mu') c(x, .)](z + ez lam' grad h(z))
        lam~ = max(0, lam - el (h(z) - eps))
        mu~  = max(0, mu + em (c(x, z) - 2))

    then the same update from w again using the fields at the look-ahead
    point w~. Here lam', mu' are the multipliers shifted by the augmented
    penalty (see :func:`_smooth_fields`); with ``cfg.penalty = 0`` they are
    lam, mu and the z half-steps are plain descent steps on L, except that
    the cost term goes through its proximal map instead of its gradient.

    Why the extras:

    * Euclidean cost has curvature 1/||z - x|| across the displacement and a
      kink at z = x, which defeats any explicit step near x; its prox is
      exact (a soft threshold toward x).
    * Near a solution the problem is locally bilinear in (z, lam), so plain
      simultaneous steps spiral outward; the look-ahead removes that.
    * The cost is flat along the displacement, so curvature of h along the
      boundary normal makes the saddle dynamics anti-damped; the penalty
      adds rho ||grad h||^2 of curvature there.
    * ``cfg.precondition`` divides the lam step and the penalty by the
      largest ||grad h||^2 seen on the row's path, so rates do not depend
      on the scale of h.
    * Each row carries a step factor s <= 1, halved (iteration rejected)
      when the smooth part of the field varies faster between w and w~
      than the step allows, and grown back after accepted steps.

    A row stops when its accepted primal step norm and both multiplier
    changes fall below ``cfg.tol``.
    """
    X, _ = _rows(x)
    n = len(X)
    Z = X.copy() if z0 is None else np.array(_rows(z0)[0], dtype=np.float64)
    lam = np.zeros(n)
    mu = np.zeros(n)
    scale = np.ones(n)
    gmax2 = np.full(n, cfg.grad_floor**2)
    iters = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    failed = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    eps = cfg.eps
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(cfg.max_iters):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            xa, za, la, ma, s = X[idx], Z[idx], lam[idx], mu[idx], scale[idx]
            if cfg.precondition:
                _, g2 = model.score_and_input_grad(za)
                gmax2[idx] = np.maximum(gmax2[idx], np.sum(g2 * g2, axis=1))
                inv_g2 = 1.0 / gmax2[idx]
            else:
                inv_g2 = np.ones(len(idx))
            rho_h = cfg.penalty * inv_g2
            rho_c = cfg.penalty
            ez = s * cfg.step_z
            em = s * cfg.step_dual
            el = em * inv_g2

            k0, m0, gl0, gm0, _ = _smooth_fields(model, cfn, xa, za, la, ma, eps, rho_h, rho_c)
            zt = cost_prox(cfn, xa, za + ez[:, None] * k0, ez * (1.0 + m0))
            lt = np.maximum(la + el * gl0, 0.0)
            mt = np.maximum(ma + em * gm0, 0.0)
            k1, m1, gl1, gm1, _ = _smooth_fields(model, cfn, xa, zt, lt, mt, eps, rho_h, rho_c)
            iters[idx] += 1

            vary = (ez * np.sum((k1 - k0) ** 2, axis=1)
                    + el * (gl1 - gl0) ** 2 + em * (gm1 - gm0) ** 2)
            dist = (np.sum((zt - za) ** 2, axis=1) / ez
                    + (lt - la) ** 2 / el + (mt - ma) ** 2 / em)
            accept = vary <= _NU**2 * dist
            scale[idx] = np.where(accept, np.minimum(1.0, s * _GROW), np.maximum(s * 0.5, _MIN_SCALE))

            zn = cost_prox(cfn, xa, za + ez[:, None] * k1, ez * (1.0 + m1))
            ln = np.maximum(la + el * gl1, 0.0)
            mn = np.maximum(ma + em * gm1, 0.0)
            # a non-finite field makes ``vary`` NaN, which would reject forever
            bad = ~(np.all(np.isfinite(zn), axis=1) & np.isfinite(ln) & np.isfinite(mn)
                    & np.all(np.isfinite(k0), axis=1) & np.all(np.isfinite(k1), axis=1))
            if bad.any():
                failed[idx[bad]] = True
                active[idx[bad]] = False
            ok = accept & ~bad
            good = idx[ok]
            dz = np.linalg.norm(zn[ok] - za[ok], axis=1)
            dl = np.abs(ln[ok] - la[ok])
            dm = np.abs(mn[ok] - ma[ok])
            Z[good], lam[good], mu[good] = zn[ok], ln[ok], mn[ok]
            done = (dz < cfg.tol) & (dl < cfg.tol) & (dm < cfg.tol)
            converged[good[done]] = True
            active[good[done]] = False
    return DualState(z=Z, lam=lam, mu=mu, iters=iters, converged=converged, failed=failed)


def respond_lagrangian(model: ScoreModel, cfn: CostFn, x, cfg: ResponseConfig = ResponseConfig(),
                       diagnostics: list | None = None, return_state: bool = False):
    """Lagrangian dual response followed by post_check.

    With ``cfg.restarts > 0`` the solver is rerun from z0 = x + noise (radius
    ``cfg.restart_radius``) and the cheapest post-checked answer is kept.
    """
    X, single = _rows(x)
    state = solve_lagrangian(model, cfn, X, cfg)
    _report_failures(state.failed, LAGRANGIAN, diagnostics)
    Z = np.where(state.failed[:, None], X, state.z)
    Z = post_check(model, cfn, X, Z)
    if cfg.restarts:
        rng = make_rng(worker_seed(cfg.seed, 0))
        best = np.where(np.any(Z != X, axis=1), np.asarray(cfn(X, Z)), np.inf)
        for _ in range(cfg.restarts):
            noise = rng.normal(size=X.shape)
            noise *= cfg.restart_radius / np.maximum(np.linalg.norm(noise, axis=1, keepdims=True), 1e-300)
            s = solve_lagrangian(model, cfn, X, cfg, z0=X + noise)
            Zr = post_check(model, cfn, X, np.where(s.failed[:, None], X, s.z))
            cr = np.where(np.any(Zr != X, axis=1), np.asarray(cfn(X, Zr)), np.inf)
            better = cr < best
            Z[better], best[better] = Zr[better], cr[better]
    Z = _out(Z, single)
    return (Z, state) if return_state else Z


def kkt_residuals(model: ScoreModel, cfn: CostFn, x, state: DualState, eps: float = 1e-3) -> KktResiduals:
    X, _ = _rows(x)
    Z, _ = _rows(state.z)
    lam = np.atleast_1d(state.lam)
    mu = np.atleast_1d(state.mu)
    h, gh = model.score_and_input_grad(Z)
    c = np.asarray(cfn(X, Z))
    gz = (1.0 + mu)[:, None] * cfn.grad_z(X, Z) - lam[:, None] * gh
    return KktResiduals(
        stationarity=np.linalg.norm(gz, axis=1),
        primal_feas_h=np.maximum(0.0, eps - h),
        primal_feas_c=np.maximum(0.0, c - BUDGET),
        comp_slack_lam=np.abs(lam * (h - eps)),
        comp_slack_mu=np.abs(mu * (c - BUDGET)),
    )


def _report_failures(failed, tag, diagnostics):
    for i in np.flatnonzero(failed):
        d = Diagnostic(int(i), tag, "non-finite iterate; returning original point")
        log.warning("%s response, point %d: %s", tag, d.index, d.message)
        if diagnostics is not None:
            diagnostics.append(d)


# -- dispatch --------------------------------------------------------------------------


def respond(strategy: ResponseStrategy, model: ScoreModel, x, cfn: CostFn | None = None,
            diagnostics: list | None = None):
    """Apply ``strategy`` to a point or batch."""
    strategy.check_model(model)
    cfn = cfn or CostFn()
    if strategy.tag == IDENTITY:
        return respond_identity(x)
    if strategy.tag == LINEAR_EXACT:
        return respond_linear_exact(model, x, form=strategy.config.linear_form, cfn=cfn)
    if strategy.tag == GRADIENT:
        return respond_gradient(model, cfn, x, strategy.config, diagnostics)
    return respond_lagrangian(model, cfn, x, strategy.config, diagnostics)


def moved_mask(X, Z) -> np.ndarray:
    """Rows where the response differs from the input (exact comparison)."""
    X, _ = _rows(X)
    Z, _ = _rows(Z)
    return np.any(Z != X, axis=1)


def with_config(strategy: ResponseStrategy, **changes) -> ResponseStrategy:
    return replace(strategy, config=replace(strategy.config, **changes))


# -- batch export ------------------------------------------------------------------------


def response_table(model: ScoreModel, cfn: CostFn, X, Z) -> tuple[list[str], np.ndarray]:
    X, _ = _rows(X)
    Z, _ = _rows(Z)
    d = X.shape[1]
    header = [f"x{i + 1}" for i in range(d)] + [f"z{i + 1}" for i in range(d)]
    header += ["moved", "cost", "h_before", "h_after"]
    cols = np.column_stack([
        X, Z,
        moved_mask(X, Z).astype(np.float64),
        np.asarray(cfn(X, Z)),
        model.score(X),
        model.score(Z),
    ])
    return header, cols


def write_response_csv(path, model: ScoreModel, cfn: CostFn, X, Z) -> None:
    header, cols = response_table(model, cfn, X, Z)
    d = (len(header) - 4) // 2
    lines = [",".join(header)]
    for row in cols:
        vals = [repr(float(v)) for v in row[: 2 * d]]
        vals.append(str(int(row[2 * d])))
        vals += [repr(float(v)) for v in row[2 * d + 1:]]
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")
