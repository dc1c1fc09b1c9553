"""Comparison estimators: adjustment-formula least squares and penalized fits.

Least-squares plug-ins
----------------------
``back_door_estimate`` is the coefficient of the treatment in the regression
of the outcome on treatment plus an adjustment set.  ``front_door_like_estimate``
is the two-stage product: the treatment coefficients from regressing each
mediator on treatment plus a first conditioning set, times the mediator
coefficients from regressing the outcome on the mediators plus a second
conditioning set (optionally including the treatment).

Penalized baselines
-------------------
All four regress the outcome on treatment plus all covariates and return the
treatment coefficient.  ``lasso`` applies a uniform L1 penalty; ``adaptive
lasso`` weights the L1 penalty by reciprocal ridge-pilot magnitudes raised to
``eta`` and standardized to sum one; ``elastic net`` mixes L1 and quadratic
penalties by ``phi``; the partially adaptive variant penalizes only the
candidate covariates (treatment and fixed covariates stay unpenalized) and
applies the active-set bias correction, making it the no-mediator special
case of the full pipeline.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, RolePartition
from .pcm import (
    MediatorCoefs,
    PcmParams,
    PilotEstimates,
    adaptive_weights,
    debias_ridges,
    pcm_correct,
    pcm_stage1_y,
    reciprocal_power_weights,
    ridge_pilot_m,
    ridge_pilot_y,
)
from .solvers import DEFAULT_MAX_SWEEPS, DEFAULT_TOL, coordinate_descent, ols_solve, ridge_solve

__all__ = [
    "back_door_estimate",
    "front_door_like_estimate",
    "baseline_penalized",
    "pal1ma_estimate",
]


def back_door_estimate(data: Dataset, x: str, y: str, z=()) -> float:
    """Treatment coefficient of the outcome regressed on treatment plus ``z``."""
    cols = [x] + list(z)
    a = data.values[:, data.index_of(cols)]
    beta = ols_solve(a.T @ a, a.T @ data.column(y))
    return float(beta[0])


def front_door_like_estimate(
    data: Dataset,
    x: str,
    y: str,
    s,
    z1=(),
    z2=(),
    *,
    include_x_in_second_stage: bool = True,
) -> float:
    """Two-stage product estimator through a mediator set ``s``.

    First stage: coefficient of ``x`` in each regression of a mediator on
    ``[x] + z1``.  Second stage: coefficients of the mediators in the
    regression of ``y`` on ``s (+ x) + z2``.  Returns their inner product.
    """
    s = list(s)
    if not s:
        raise ValueError("front-door-like estimation needs at least one mediator")
    first_design = data.values[:, data.index_of([x] + list(z1))]
    med = data.values[:, data.index_of(s)]
    first = ols_solve(first_design.T @ first_design, first_design.T @ med)
    x_on_med = first[0, :]

    second_cols = s + ([x] if include_x_in_second_stage else []) + list(z2)
    second_design = data.values[:, data.index_of(second_cols)]
    second = ols_solve(second_design.T @ second_design, second_design.T @ data.column(y))
    med_on_y = second[: len(s)]
    return float(x_on_med @ med_on_y)


def baseline_penalized(
    data: Dataset,
    roles: RolePartition,
    method: str,
    lam: float,
    *,
    eta: float = 1.0,
    phi: float = 0.5,
    pilot_lam: float = 1.0,
    lam2: float = 0.01,
    xi2: float = 0.5,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> float:
    """Treatment coefficient from a penalized regression on treatment + covariates.

    ``method`` is one of ``lasso``, ``adaptive_lasso``, ``elastic_net``,
    ``pal1ma``.  ``eta`` is the adaptive-weight exponent, ``phi`` the L1
    share of the elastic-net penalty, ``pilot_lam`` the ridge-pilot penalty
    for the adaptive variants.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if method == "pal1ma":
        return pal1ma_estimate(
            data, roles, lam, eta=eta, pilot_lam=pilot_lam,
            lam2=lam2, xi2=xi2, tol=tol, max_sweeps=max_sweeps,
        )
    cols = [roles.x] + list(roles.covariates)
    a = data.values[:, data.index_of(cols)]
    n, p = a.shape
    gram, cross = a.T @ a, a.T @ data.column(roles.y)
    if method == "lasso":
        l1, l2 = np.full(p, lam), None
    elif method == "elastic_net":
        if not 0.0 <= phi <= 1.0:
            raise ValueError("phi must lie in [0, 1]")
        l1, l2 = np.full(p, lam * phi), np.full(p, lam * (1.0 - phi))
    elif method == "adaptive_lasso":
        pilot = ridge_solve(gram, cross, n, np.full(p, pilot_lam))
        w, _ = reciprocal_power_weights(pilot, eta=eta, normalize=False)
        l1, l2 = lam * w, None
    else:
        raise ValueError(f"unknown penalized baseline {method!r}")
    beta = coordinate_descent(gram, cross, n, l1, l2, tol=tol, max_sweeps=max_sweeps)
    return float(beta[0])


def pal1ma_estimate(
    data: Dataset,
    roles: RolePartition,
    lam: float,
    *,
    eta: float = 1.0,
    pilot_lam: float = 1.0,
    lam2: float = 0.01,
    xi2: float = 0.5,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> float:
    """Partially adaptive L1 fit with bias correction (no mediators).

    Candidate covariates are the only penalized block, with standardized
    reciprocal pilot weights raised to ``eta``; the treatment and fixed
    covariates stay unpenalized.  The treatment coefficient then gets the
    active-set correction built from an unpenalized refit of the treatment
    on the covariates and the residual gram of the active candidates.
    With ``eta == 1`` this equals the full pipeline run with an empty
    mediator partition and zero treatment/mediator penalty shares.
    """
    base = RolePartition(x=roles.x, y=roles.y, z=roles.z, zbar=roles.zbar)
    pilots = PilotEstimates(
        y=ridge_pilot_y(data, base, pilot_lam),
        m=ridge_pilot_m(data, base, pilot_lam),
        lam=pilot_lam,
        rho=pilot_lam,
    )
    weights = adaptive_weights(pilots)
    if eta != 1.0:
        w_zbar, floored = reciprocal_power_weights(pilots.y.coef_zbar, eta=eta)
        weights = type(weights)(
            sbar=weights.sbar, zbar=w_zbar, med=weights.med, floored=floored
        )
    s1 = pcm_stage1_y(data, base, weights, lam, 0.0, 0.0, tol=tol, max_sweeps=max_sweeps)
    active_x = s1.beta_x != 0.0
    active_zbar = np.nonzero(s1.coef_zbar)[0]
    no_sbar = np.zeros(0, dtype=int)
    blocks = debias_ridges(
        data, base, no_sbar, active_zbar, lam2, xi2, 0.0, 0.0, include_x=active_x
    )
    empty_med = MediatorCoefs(
        x_row=np.zeros(0),
        z_rows=np.zeros((len(base.z), 0)),
        zbar_rows=np.zeros((active_zbar.size, 0)),
    )
    params = PcmParams(
        lambda1=lam, rho1=0.0, zeta1=0.0, xi1=0.0,
        pilot_lambda=pilot_lam, pilot_rho=pilot_lam,
        lambda2=lam2, xi2=xi2, rho2=0.0, rho2_prime=0.0,
        tol=tol, max_sweeps=max_sweeps,
    )
    corrected = pcm_correct(
        s1, empty_med, blocks, weights, params, data.n,
        active_x, no_sbar, active_zbar, q_s=0,
    )
    return float(corrected.beta_x)
