"""The two-stage covariate/mediator-selecting total-effect estimator.

Pipeline (all on standardized data):

1.  Ridge pilots.  An outcome-model pilot solves the block system of the
    outcome on [treatment, fixed mediators, fixed covariates, candidate
    mediators, candidate covariates] with ``n * lam`` added to the diagonal
    of the treatment and candidate blocks only.  A mediator-model pilot does
    the same for each mediator on [treatment, covariates] with ``n * rho`` on
    the candidate-covariate diagonal.
2.  Adaptive weights.  Reciprocal pilot magnitudes, standardized to sum one:
    candidate-mediator weights come from the mediator-model treatment
    coefficients, candidate-covariate weights from the outcome-model pilot,
    and a matrix of weights for the mediator model from its own
    candidate-covariate pilots.
3.  Stage 1.  Weighted-L1 fits by cyclic coordinate descent.  The outcome
    model penalizes the treatment with weight ``lam1*zeta1``, candidate
    mediators with ``lam1*xi1*w``, candidate covariates with
    ``lam1*(1-zeta1-xi1)*w``; fixed covariates and mediators are never
    penalized.  The mediator model penalizes candidate covariates only.
    The supports of the treatment / candidate blocks are the active sets.
4.  Debiasing ridges on the active sets, their residual gram matrices, and a
    sign-based correction that removes the first-order shrinkage bias from
    the stage-1 coefficients.
5.  Total effect: corrected treatment coefficient plus the product of the
    corrected treatment-on-mediator and mediator-on-outcome blocks (the
    treatment coefficient is zero when stage 1 deactivated the treatment).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, RolePartition
from .errors import SingularDesign, ZeroPilot
from .linalg import conditional_cross_products as ccp
from .linalg import pseudo_inverse
from .solvers import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL,
    coordinate_descent,
    ols_solve,
    ridge_solve,
)

__all__ = [
    "PcmParams",
    "YModelCoefs",
    "MediatorCoefs",
    "PilotEstimates",
    "AdaptiveWeights",
    "DebiasBlocks",
    "CorrectedBlocks",
    "PcmFit",
    "ols_joint",
    "ridge_pilot_y",
    "ridge_pilot_m",
    "adaptive_weights",
    "reciprocal_power_weights",
    "pcm_stage1_y",
    "pcm_stage1_m",
    "debias_ridges",
    "pcm_correct",
    "pcm_total_effect",
    "verify_active_set_relation",
]

WEIGHT_FLOOR = 1e-8

# Relative singular-value cutoff for the residual-gram pseudoinverses in the
# bias correction.  These grams are singular to machine precision whenever the
# active design nearly saturates the sample, and directions below sampling
# noise would otherwise dominate the correction.
CORRECTION_PINV_TOL = 1e-3


# ---------------------------------------------------------------------------
# parameters and result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PcmParams:
    """Hyperparameters of the full pipeline.

    ``lambda1, zeta1, xi1`` control the outcome-model stage-1 penalties,
    ``rho1`` the mediator-model stage-1 penalty, ``pilot_lambda`` and
    ``pilot_rho`` the ridge pilots, and ``lambda2, xi2, rho2, rho2_prime``
    the debiasing ridges.  Constraints: all nonnegative, ``zeta1 + xi1 <= 1``,
    ``xi2`` in [0, 1].
    """

    lambda1: float
    rho1: float
    zeta1: float
    xi1: float
    pilot_lambda: float = 1.0
    pilot_rho: float = 1.0
    lambda2: float = 0.01
    xi2: float = 0.5
    rho2: float = 0.01
    rho2_prime: float = 0.01
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        for name in ("lambda1", "rho1", "zeta1", "xi1", "pilot_lambda",
                     "pilot_rho", "lambda2", "rho2", "rho2_prime"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.zeta1 + self.xi1 > 1.0 + 1e-12:
            raise ValueError("zeta1 + xi1 must not exceed 1")
        if not 0.0 <= self.xi2 <= 1.0:
            raise ValueError("xi2 must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1, "rho1": self.rho1,
            "zeta1": self.zeta1, "xi1": self.xi1,
            "pilot_lambda": self.pilot_lambda, "pilot_rho": self.pilot_rho,
            "lambda2": self.lambda2, "xi2": self.xi2,
            "rho2": self.rho2, "rho2_prime": self.rho2_prime,
        }


@dataclass(frozen=True)
class YModelCoefs:
    """Outcome-model coefficient blocks (shared by OLS, pilot, and stage 1)."""

    beta_x: float
    coef_s: np.ndarray
    coef_z: np.ndarray
    coef_sbar: np.ndarray
    coef_zbar: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate(
            [[self.beta_x], self.coef_s, self.coef_z, self.coef_sbar, self.coef_zbar]
        )


@dataclass(frozen=True)
class MediatorCoefs:
    """Mediator-model coefficients: rows for x / fixed / candidate covariates.

    ``x_row`` has one entry per mediator column; ``z_rows`` is
    (q_z, n_mediators); ``zbar_rows`` is (q_zbar_used, n_mediators).
    """

    x_row: np.ndarray
    z_rows: np.ndarray
    zbar_rows: np.ndarray


@dataclass(frozen=True)
class PilotEstimates:
    y: YModelCoefs
    m: MediatorCoefs
    lam: float
    rho: float


@dataclass(frozen=True)
class AdaptiveWeights:
    """Standardized reciprocal-magnitude weights.

    ``sbar`` and ``zbar`` each sum to one (when nonempty); ``med`` is a
    (q_zbar, q_m) matrix summing to one overall.  ``floored`` reports whether
    any pilot magnitude hit the reciprocal floor.
    """

    sbar: np.ndarray
    zbar: np.ndarray
    med: np.ndarray
    floored: bool = False


@dataclass(frozen=True)
class DebiasBlocks:
    """Active-set ridge refits used by the bias correction.

    ``x_model``: treatment on [fixed covariates, active candidates, fixed and
    active mediators] (absent when the treatment is inactive).
    ``sbar_model`` / ``zbar_model``: active candidate mediators / covariates
    on the remaining regressors.  ``zbar_on_xz``: unpenalized refit of the
    active candidate covariates on treatment and fixed covariates, used by
    the mediator-equation correction.  Residual gram matrices accompany each
    block.
    """

    include_x: bool
    x_coef_z: np.ndarray | None
    x_coef_zbar: np.ndarray | None
    x_coef_s: np.ndarray | None
    x_coef_sbar: np.ndarray | None
    x_resid_ss: float | None
    sb_coef_x: np.ndarray | None
    sb_coef_s: np.ndarray | None
    sb_coef_z: np.ndarray | None
    sb_coef_zbar: np.ndarray | None
    sb_resid_gram: np.ndarray | None
    zb_coef_x: np.ndarray | None
    zb_coef_z: np.ndarray | None
    zb_coef_s: np.ndarray | None
    zb_coef_sbar: np.ndarray | None
    zb_resid_gram: np.ndarray | None
    zb_on_xz_coef_x: np.ndarray | None
    zb_on_xz_resid_gram: np.ndarray | None


@dataclass(frozen=True)
class CorrectedBlocks:
    """Sign-corrected coefficients entering the total-effect formula."""

    beta_x: float
    coef_s: np.ndarray
    coef_sbar_active: np.ndarray
    med_x: np.ndarray  # treatment effect on [fixed, active candidate] mediators
    y_on_mediators: np.ndarray


@dataclass(frozen=True)
class PcmFit:
    """Everything produced by one run of the pipeline."""

    params: PcmParams
    pilots: PilotEstimates
    weights: AdaptiveWeights
    stage1_y: YModelCoefs
    stage1_m: MediatorCoefs
    active_x: bool
    active_sbar: np.ndarray
    active_zbar: np.ndarray
    stage1_m_restricted: MediatorCoefs
    debias: DebiasBlocks
    corrected: CorrectedBlocks
    total_effect: float

    def to_dict(self) -> dict:
        def arr(a):
            return np.asarray(a).tolist()

        return {
            "total_effect": self.total_effect,
            "active_x": bool(self.active_x),
            "active_sbar": arr(self.active_sbar),
            "active_zbar": arr(self.active_zbar),
            "stage1_y": {
                "beta_x": self.stage1_y.beta_x,
                "coef_s": arr(self.stage1_y.coef_s),
                "coef_z": arr(self.stage1_y.coef_z),
                "coef_sbar": arr(self.stage1_y.coef_sbar),
                "coef_zbar": arr(self.stage1_y.coef_zbar),
            },
            "stage1_m": {
                "x_row": arr(self.stage1_m.x_row),
                "z_rows": arr(self.stage1_m.z_rows),
                "zbar_rows": arr(self.stage1_m.zbar_rows),
            },
            "corrected": {
                "beta_x": self.corrected.beta_x,
                "coef_s": arr(self.corrected.coef_s),
                "coef_sbar_active": arr(self.corrected.coef_sbar_active),
                "med_x": arr(self.corrected.med_x),
                "y_on_mediators": arr(self.corrected.y_on_mediators),
            },
            "weights": {
                "sbar": arr(self.weights.sbar),
                "zbar": arr(self.weights.zbar),
                "med": arr(self.weights.med),
                "floored": bool(self.weights.floored),
            },
            "params": self.params.to_dict(),
        }


# ---------------------------------------------------------------------------
# design assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Design:
    """Column blocks for one role partition, all 2-D of shape (n, q)."""

    y: np.ndarray
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    sbar: np.ndarray
    zbar: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def y_design(self) -> np.ndarray:
        """Outcome-model design, blocks ordered [x, s, z, sbar, zbar]."""
        return np.hstack([self.x, self.s, self.z, self.sbar, self.zbar])

    def m_design(self, zbar_idx=None) -> np.ndarray:
        zb = self.zbar if zbar_idx is None else self.zbar[:, zbar_idx]
        return np.hstack([self.x, self.z, zb])

    def mediators(self, sbar_idx=None) -> np.ndarray:
        sb = self.sbar if sbar_idx is None else self.sbar[:, sbar_idx]
        return np.hstack([self.s, sb])


def _design(data: Dataset, roles: RolePartition) -> _Design:
    data.check_roles(roles)
    v = data.values

    def block(names) -> np.ndarray:
        if not names:
            return np.zeros((data.n, 0))
        return v[:, data.index_of(names)]

    return _Design(
        y=block([roles.y]),
        x=block([roles.x]),
        s=block(roles.s),
        z=block(roles.z),
        sbar=block(roles.sbar),
        zbar=block(roles.zbar),
    )


def _split_y_coefs(beta: np.ndarray, q_s: int, q_z: int, q_sb: int, q_zb: int) -> YModelCoefs:
    parts = np.split(beta, np.cumsum([1, q_s, q_z, q_sb]))
    return YModelCoefs(
        beta_x=float(parts[0][0]),
        coef_s=parts[1],
        coef_z=parts[2],
        coef_sbar=parts[3],
        coef_zbar=parts[4],
    )


# ---------------------------------------------------------------------------
# least squares and ridge pilots
# ---------------------------------------------------------------------------


def ols_joint(data: Dataset, roles: RolePartition) -> YModelCoefs:
    """Joint least-squares fit of the outcome on treatment, covariates, mediators.

    Raises
    ------
    SingularDesign
        When the design gram matrix is numerically singular; that is the
        regime where only the penalized estimators apply.
    """
    d = _design(data, roles)
    a = d.y_design()
    beta = ols_solve(a.T @ a, a.T @ d.y[:, 0])
    return _split_y_coefs(beta, d.s.shape[1], d.z.shape[1], d.sbar.shape[1], d.zbar.shape[1])


def ridge_pilot_y(data: Dataset, roles: RolePartition, lam: float) -> YModelCoefs:
    """Outcome-model pilot: ``n*lam`` on the treatment/candidate diagonal blocks.

    Fixed covariates and mediators carry no penalty, so at ``lam == 0`` this
    is exactly the joint least-squares fit (and requires an invertible
    design).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    d = _design(data, roles)
    a = d.y_design()
    q_s, q_z = d.s.shape[1], d.z.shape[1]
    q_sb, q_zb = d.sbar.shape[1], d.zbar.shape[1]
    diag = np.concatenate(
        [[lam], np.zeros(q_s + q_z), np.full(q_sb, lam), np.full(q_zb, lam)]
    )
    gram, cross = a.T @ a, a.T @ d.y[:, 0]
    if lam == 0:
        beta = ols_solve(gram, cross)
    else:
        beta = ridge_solve(gram, cross, d.n, diag)
    return _split_y_coefs(beta, q_s, q_z, q_sb, q_zb)


def ridge_pilot_m(data: Dataset, roles: RolePartition, rho: float) -> MediatorCoefs:
    """Mediator-model pilot: each mediator on [x, z, zbar], ``n*rho`` on zbar."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    d = _design(data, roles)
    m = d.mediators()
    a = d.m_design()
    q_z, q_zb = d.z.shape[1], d.zbar.shape[1]
    if m.shape[1] == 0:
        return MediatorCoefs(
            x_row=np.zeros(0), z_rows=np.zeros((q_z, 0)), zbar_rows=np.zeros((q_zb, 0))
        )
    diag = np.concatenate([[0.0], np.zeros(q_z), np.full(q_zb, rho)])
    gram, cross = a.T @ a, a.T @ m
    if rho == 0 or q_zb == 0:
        coefs = ols_solve(gram, cross)
    else:
        coefs = ridge_solve(gram, cross, d.n, diag)
    return MediatorCoefs(
        x_row=coefs[0, :], z_rows=coefs[1 : 1 + q_z, :], zbar_rows=coefs[1 + q_z :, :]
    )


# ---------------------------------------------------------------------------
# adaptive weights
# ---------------------------------------------------------------------------


def reciprocal_power_weights(values: np.ndarray, eta: float = 1.0,
                             floor: float = WEIGHT_FLOOR,
                             normalize: bool = True) -> tuple[np.ndarray, bool]:
    """``|v|**-eta`` weights with a magnitude floor, standardized to sum one.

    Returns the weights and whether any magnitude was floored.  With
    ``floor == 0`` an exactly zero value raises :class:`ZeroPilot`;
    ``normalize=False`` skips the sum-one standardization (the classical
    adaptive-weight form).
    """
    mags = np.abs(np.asarray(values, dtype=float)).ravel()
    if mags.size == 0:
        return mags.reshape(np.asarray(values).shape), False
    if floor <= 0:
        zero = np.nonzero(mags == 0.0)[0]
        if zero.size:
            raise ZeroPilot(int(zero[0]))
        floored = False
    else:
        floored = bool(np.any(mags < floor))
        mags = np.maximum(mags, floor)
    raw = np.power(mags, -eta)
    out = raw / raw.sum() if normalize else raw
    return out.reshape(np.asarray(values).shape), floored


def adaptive_weights(pilots: PilotEstimates, *, floor: float = WEIGHT_FLOOR) -> AdaptiveWeights:
    """Standardized weights from the pilot coefficient magnitudes.

    Candidate-mediator weights use the treatment coefficients of the
    mediator-model pilot (a mediator whose treatment pilot vanishes carries
    no treatment effect, so its outcome coefficient should be free to drop);
    candidate-covariate weights use the outcome-model pilot; the mediator
    weight matrix uses the mediator-model candidate-covariate pilots.
    """
    q_m = pilots.m.x_row.shape[0]
    q_sb = pilots.y.coef_sbar.shape[0]
    q_s = q_m - q_sb
    w_sbar, f1 = reciprocal_power_weights(pilots.m.x_row[q_s:], floor=floor)
    w_zbar, f2 = reciprocal_power_weights(pilots.y.coef_zbar, floor=floor)
    w_med, f3 = reciprocal_power_weights(pilots.m.zbar_rows, floor=floor)
    return AdaptiveWeights(
        sbar=w_sbar, zbar=w_zbar, med=w_med, floored=bool(f1 or f2 or f3)
    )


# ---------------------------------------------------------------------------
# stage 1 (weighted L1)
# ---------------------------------------------------------------------------


def _y_l1_weights(q_s, q_z, q_sb, q_zb, w: AdaptiveWeights,
                  lam1: float, zeta1: float, xi1: float) -> np.ndarray:
    return np.concatenate(
        [
            [lam1 * zeta1],
            np.zeros(q_s + q_z),
            lam1 * xi1 * w.sbar,
            lam1 * (1.0 - zeta1 - xi1) * w.zbar,
        ]
    )


def pcm_stage1_y(
    data: Dataset,
    roles: RolePartition,
    weights: AdaptiveWeights,
    lam1: float,
    zeta1: float,
    xi1: float,
    *,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> YModelCoefs:
    """Weighted-L1 outcome fit; fixed covariates/mediators stay unpenalized."""
    if min(lam1, zeta1, xi1) < 0 or zeta1 + xi1 > 1 + 1e-12:
        raise ValueError("need lam1, zeta1, xi1 >= 0 and zeta1 + xi1 <= 1")
    d = _design(data, roles)
    a = d.y_design()
    q_s, q_z = d.s.shape[1], d.z.shape[1]
    q_sb, q_zb = d.sbar.shape[1], d.zbar.shape[1]
    l1 = _y_l1_weights(q_s, q_z, q_sb, q_zb, weights, lam1, zeta1, xi1)
    beta = coordinate_descent(
        a.T @ a, a.T @ d.y[:, 0], d.n, l1, tol=tol, max_sweeps=max_sweeps
    )
    return _split_y_coefs(beta, q_s, q_z, q_sb, q_zb)


def pcm_stage1_m(
    data: Dataset,
    roles: RolePartition,
    weights: AdaptiveWeights,
    rho1: float,
    *,
    sbar_idx=None,
    zbar_idx=None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> MediatorCoefs:
    """Weighted-L1 mediator fits (one independent problem per mediator).

    The squared loss and the elementwise penalty both separate across
    mediator columns, so each column is solved on the shared design
    [x, z, zbar] with its own candidate-covariate weights.  ``sbar_idx`` /
    ``zbar_idx`` restrict the candidate mediators (responses) and candidate
    covariates (regressors) to subsets; weights are subselected accordingly.
    """
    if rho1 < 0:
        raise ValueError("rho1 must be nonnegative")
    d = _design(data, roles)
    q_s = d.s.shape[1]
    sb_cols = np.arange(d.sbar.shape[1]) if sbar_idx is None else np.asarray(sbar_idx, int)
    zb_cols = np.arange(d.zbar.shape[1]) if zbar_idx is None else np.asarray(zbar_idx, int)
    responses = d.mediators(sb_cols)
    a = d.m_design(zb_cols)
    q_z, q_zb = d.z.shape[1], zb_cols.size
    q_m = responses.shape[1]
    if q_m == 0:
        return MediatorCoefs(np.zeros(0), np.zeros((q_z, 0)), np.zeros((q_zb, 0)))
    med_cols = np.concatenate([np.arange(q_s), q_s + sb_cols]).astype(int)
    gram = a.T @ a
    coefs = np.zeros((1 + q_z + q_zb, q_m))
    for j in range(q_m):
        w_j = weights.med[np.ix_(zb_cols, med_cols[j : j + 1])][:, 0] if q_zb else np.zeros(0)
        l1 = np.concatenate([[0.0], np.zeros(q_z), rho1 * w_j])
        coefs[:, j] = coordinate_descent(
            gram, a.T @ responses[:, j], d.n, l1, tol=tol, max_sweeps=max_sweeps
        )
    return MediatorCoefs(
        x_row=coefs[0, :], z_rows=coefs[1 : 1 + q_z, :], zbar_rows=coefs[1 + q_z :, :]
    )


# ---------------------------------------------------------------------------
# debiasing ridges
# ---------------------------------------------------------------------------


def debias_ridges(
    data: Dataset,
    roles: RolePartition,
    active_sbar,
    active_zbar,
    lam2: float,
    xi2: float,
    rho2: float,
    rho2_prime: float,
    *,
    include_x: bool = True,
) -> DebiasBlocks:
    """Ridge refits on the active sets plus their residual gram matrices.

    Three quadratic problems: the treatment on everything else (penalizing
    the candidate blocks by ``lam2*xi2`` / ``lam2*(1-xi2)``); the active
    candidate mediators on the rest (penalty ``rho2`` on candidate
    covariates); the active candidate covariates on the rest (penalty
    ``rho2_prime`` on candidate mediators).  A quadratic penalty ``p`` adds
    ``n*p`` to the gram diagonal, matching the pilot convention.  With all
    penalties zero the refits reduce to least squares and the residual grams
    to conditional cross-products.

    ``include_x=False`` (treatment inactive in stage 1) skips the treatment
    refit and drops the treatment column from the other designs.
    """
    d = _design(data, roles)
    act_sb = np.asarray(active_sbar, dtype=int)
    act_zb = np.asarray(active_zbar, dtype=int)
    n = d.n
    q_s, q_z = d.s.shape[1], d.z.shape[1]
    q_sa, q_za = act_sb.size, act_zb.size
    sba = d.sbar[:, act_sb]
    zba = d.zbar[:, act_zb]

    x_coef_z = x_coef_zbar = x_coef_s = x_coef_sbar = None
    x_resid_ss = None
    if include_x:
        a = np.hstack([d.z, zba, d.s, sba])
        diag = np.concatenate(
            [np.zeros(q_z), np.full(q_za, lam2 * (1 - xi2)),
             np.zeros(q_s), np.full(q_sa, lam2 * xi2)]
        )
        coef = ridge_solve(a.T @ a, a.T @ d.x[:, 0], n, diag)
        parts = np.split(coef, np.cumsum([q_z, q_za, q_s]))
        x_coef_z, x_coef_zbar, x_coef_s, x_coef_sbar = parts
        resid = d.x[:, 0] - a @ coef
        x_resid_ss = float(resid @ resid)

    sb_coef_x = sb_coef_s = sb_coef_z = sb_coef_zbar = sb_resid_gram = None
    if q_sa:
        blocks = ([d.x] if include_x else []) + [d.s, d.z, zba]
        a = np.hstack(blocks)
        qx = 1 if include_x else 0
        diag = np.concatenate([np.zeros(qx + q_s + q_z), np.full(q_za, rho2)])
        coef = ridge_solve(a.T @ a, a.T @ sba, n, diag)
        off = 0
        if include_x:
            sb_coef_x = coef[0, :]
            off = 1
        sb_coef_s = coef[off : off + q_s, :]
        sb_coef_z = coef[off + q_s : off + q_s + q_z, :]
        sb_coef_zbar = coef[off + q_s + q_z :, :]
        resid = sba - a @ coef
        sb_resid_gram = resid.T @ resid

    zb_coef_x = zb_coef_z = zb_coef_s = zb_coef_sbar = zb_resid_gram = None
    zb_on_xz_coef_x = zb_on_xz_resid_gram = None
    if q_za:
        blocks = ([d.x] if include_x else []) + [d.z, d.s, sba]
        a = np.hstack(blocks)
        qx = 1 if include_x else 0
        diag = np.concatenate([np.zeros(qx + q_z + q_s), np.full(q_sa, rho2_prime)])
        coef = ridge_solve(a.T @ a, a.T @ zba, n, diag)
        off = 0
        if include_x:
            zb_coef_x = coef[0, :]
            off = 1
        zb_coef_z = coef[off : off + q_z, :]
        zb_coef_s = coef[off + q_z : off + q_z + q_s, :]
        zb_coef_sbar = coef[off + q_z + q_s :, :]
        resid = zba - a @ coef
        zb_resid_gram = resid.T @ resid

        a_xz = np.hstack([d.x, d.z])
        coef_xz = ols_solve(a_xz.T @ a_xz, a_xz.T @ zba)
        zb_on_xz_coef_x = coef_xz[0, :]
        resid_xz = zba - a_xz @ coef_xz
        zb_on_xz_resid_gram = resid_xz.T @ resid_xz

    return DebiasBlocks(
        include_x=include_x,
        x_coef_z=x_coef_z, x_coef_zbar=x_coef_zbar,
        x_coef_s=x_coef_s, x_coef_sbar=x_coef_sbar, x_resid_ss=x_resid_ss,
        sb_coef_x=sb_coef_x, sb_coef_s=sb_coef_s, sb_coef_z=sb_coef_z,
        sb_coef_zbar=sb_coef_zbar, sb_resid_gram=sb_resid_gram,
        zb_coef_x=zb_coef_x, zb_coef_z=zb_coef_z, zb_coef_s=zb_coef_s,
        zb_coef_sbar=zb_coef_sbar, zb_resid_gram=zb_resid_gram,
        zb_on_xz_coef_x=zb_on_xz_coef_x, zb_on_xz_resid_gram=zb_on_xz_resid_gram,
    )


# ---------------------------------------------------------------------------
# correction and assembly
# ---------------------------------------------------------------------------


def _correction_matrix(debias: DebiasBlocks, q_s: int, q_sa: int, q_za: int,
                       include_x: bool) -> np.ndarray:
    """Partial-regression matrix that maps penalty subgradients to coefficients."""
    rows = (1 if include_x else 0) + q_s + q_sa
    cols = (1 if include_x else 0) + q_sa + q_za
    m = np.zeros((rows, cols))
    r = c = 0
    if include_x:
        m[0, 0] = -1.0
        if q_sa:
            m[0, 1 : 1 + q_sa] = debias.sb_coef_x
        if q_za:
            m[0, 1 + q_sa :] = debias.zb_coef_x
        if q_s:
            m[1 : 1 + q_s, 0] = debias.x_coef_s
        if q_sa:
            m[1 + q_s :, 0] = debias.x_coef_sbar
        r = c = 1
    if q_s:
        if q_sa:
            m[r : r + q_s, c : c + q_sa] = debias.sb_coef_s
        if q_za:
            m[r : r + q_s, c + q_sa :] = debias.zb_coef_s
    if q_sa:
        m[r + q_s :, c : c + q_sa] = -np.eye(q_sa)
        if q_za:
            m[r + q_s :, c + q_sa :] = debias.zb_coef_sbar
    return m


def _inv_or_zero(value: float) -> float:
    return 1.0 / value if abs(value) > 1e-300 else 0.0


def pcm_correct(
    stage1_y: YModelCoefs,
    stage1_m_restricted: MediatorCoefs,
    debias: DebiasBlocks,
    weights: AdaptiveWeights,
    params: PcmParams,
    n: int,
    active_x: bool,
    active_sbar,
    active_zbar,
    q_s: int,
) -> CorrectedBlocks:
    """Remove the first-order shrinkage bias from the stage-1 coefficients.

    The corrected outcome blocks subtract ``n*lambda1`` times the
    partial-regression matrix (built from the debiasing ridges) applied to
    the sign-and-weight subgradient vector, with residual gram
    pseudoinverses standing in for the conditional gram inverses.  The
    treatment-on-mediator row gets the analogous ``n*rho1`` correction.
    When the treatment is inactive its corrected coefficient is exactly
    zero and all treatment-dependent blocks drop out.
    """
    act_sb = np.asarray(active_sbar, dtype=int)
    act_zb = np.asarray(active_zbar, dtype=int)
    q_sa, q_za = act_sb.size, act_zb.size
    lam1, zeta1, xi1, rho1 = params.lambda1, params.zeta1, params.xi1, params.rho1

    sb_signs = np.sign(stage1_y.coef_sbar[act_sb])
    zb_signs = np.sign(stage1_y.coef_zbar[act_zb])
    u_parts = []
    if active_x:
        u_parts.append(
            [zeta1 * _inv_or_zero(debias.x_resid_ss) * np.sign(stage1_y.beta_x)]
        )
    if q_sa:
        u_parts.append(
            xi1 * pseudo_inverse(debias.sb_resid_gram, CORRECTION_PINV_TOL)
            @ (weights.sbar[act_sb] * sb_signs)
        )
    else:
        u_parts.append(np.zeros(0))
    if q_za:
        u_parts.append(
            (1.0 - zeta1 - xi1)
            * pseudo_inverse(debias.zb_resid_gram, CORRECTION_PINV_TOL)
            @ (weights.zbar[act_zb] * zb_signs)
        )
    else:
        u_parts.append(np.zeros(0))
    u = np.concatenate([np.atleast_1d(p) for p in u_parts])

    m = _correction_matrix(debias, q_s, q_sa, q_za, include_x=active_x)
    target_parts = ([stage1_y.beta_x] if active_x else [])
    target = np.concatenate(
        [np.atleast_1d(target_parts), stage1_y.coef_s, stage1_y.coef_sbar[act_sb]]
    )
    corrected = target - n * lam1 * (m @ u)
    off = 1 if active_x else 0
    beta_x = float(corrected[0]) if active_x else 0.0
    coef_s = corrected[off : off + q_s]
    coef_sbar_active = corrected[off + q_s :]

    med_x = stage1_m_restricted.x_row.copy()
    if med_x.size and q_za:
        med_cols = np.concatenate([np.arange(q_s), q_s + act_sb]).astype(int)
        gamma = weights.med[np.ix_(act_zb, med_cols)]
        signs = np.sign(stage1_m_restricted.zbar_rows)
        med_x = med_x - n * rho1 * (
            debias.zb_on_xz_coef_x
            @ pseudo_inverse(debias.zb_on_xz_resid_gram, CORRECTION_PINV_TOL)
            @ (gamma * signs)
        )
    y_on_med = np.concatenate([coef_s, coef_sbar_active])
    return CorrectedBlocks(
        beta_x=beta_x,
        coef_s=coef_s,
        coef_sbar_active=coef_sbar_active,
        med_x=med_x,
        y_on_mediators=y_on_med,
    )


def pcm_total_effect(data: Dataset, roles: RolePartition, params: PcmParams) -> PcmFit:
    """Run the full pipeline on a standardized dataset.

    Pilots -> weights -> stage-1 fits -> active sets -> restricted mediator
    refit -> debiasing ridges -> corrections -> total effect.  The total
    effect is the corrected treatment coefficient plus the inner product of
    the corrected treatment-on-mediator and mediator-on-outcome blocks over
    the fixed and active candidate mediators.
    """
    d = _design(data, roles)
    pilots = PilotEstimates(
        y=ridge_pilot_y(data, roles, params.pilot_lambda),
        m=ridge_pilot_m(data, roles, params.pilot_rho),
        lam=params.pilot_lambda,
        rho=params.pilot_rho,
    )
    weights = adaptive_weights(pilots)
    s1y = pcm_stage1_y(
        data, roles, weights, params.lambda1, params.zeta1, params.xi1,
        tol=params.tol, max_sweeps=params.max_sweeps,
    )
    active_x = s1y.beta_x != 0.0
    active_sbar = np.nonzero(s1y.coef_sbar)[0]
    active_zbar = np.nonzero(s1y.coef_zbar)[0]
    s1m = pcm_stage1_m(
        data, roles, weights, params.rho1, tol=params.tol, max_sweeps=params.max_sweeps
    )
    s1m_restricted = pcm_stage1_m(
        data, roles, weights, params.rho1,
        sbar_idx=active_sbar, zbar_idx=active_zbar,
        tol=params.tol, max_sweeps=params.max_sweeps,
    )
    debias = debias_ridges(
        data, roles, active_sbar, active_zbar,
        params.lambda2, params.xi2, params.rho2, params.rho2_prime,
        include_x=active_x,
    )
    corrected = pcm_correct(
        s1y, s1m_restricted, debias, weights, params, d.n,
        active_x, active_sbar, active_zbar, d.s.shape[1],
    )
    tau = corrected.beta_x + float(corrected.med_x @ corrected.y_on_mediators)
    return PcmFit(
        params=params,
        pilots=pilots,
        weights=weights,
        stage1_y=s1y,
        stage1_m=s1m,
        active_x=active_x,
        active_sbar=active_sbar,
        active_zbar=active_zbar,
        stage1_m_restricted=s1m_restricted,
        debias=debias,
        corrected=corrected,
        total_effect=float(tau),
    )


# ---------------------------------------------------------------------------
# structural verification of the stage-1 solutions
# ---------------------------------------------------------------------------


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(str(exc)) from exc


def verify_active_set_relation(fit: PcmFit, data: Dataset, roles: RolePartition) -> float:
    """Max discrepancy of the closed-form stationarity relations at the fit.

    On the active restriction, the stage-1 outcome coefficients must equal
    the restricted least-squares coefficients plus ``n*lambda1`` times the
    partial-regression matrix applied to the weighted sign vector (with the
    treatment-inactive variant substituting zeros for every
    treatment-dependent block).  The mediator-model fit satisfies the
    analogous relation per mediator column on that column's own active
    candidate covariates.  Returns the largest absolute violation; small
    values certify that coordinate descent reached a stationary point.

    Raises
    ------
    SingularDesign
        If a restricted design needed by the relation is singular.
    """
    d = _design(data, roles)
    v = data.values
    n = d.n
    params = fit.params
    act_sb = np.asarray(fit.active_sbar, dtype=int)
    act_zb = np.asarray(fit.active_zbar, dtype=int)
    q_s, q_z = d.s.shape[1], d.z.shape[1]
    q_sa, q_za = act_sb.size, act_zb.size

    ix = data.index_of([roles.x]).tolist()
    iy = data.index_of([roles.y]).tolist()
    is_ = data.index_of(roles.s).tolist()
    iz = data.index_of(roles.z).tolist()
    isb = [data.index_of(roles.sbar).tolist()[i] for i in act_sb]
    izb = [data.index_of(roles.zbar).tolist()[i] for i in act_zb]
    include_x = bool(fit.active_x)

    def B(resp, reg, given):
        """Coefficients of ``reg`` in the joint regression of ``resp``."""
        return _solve(ccp(v, reg, reg, given), ccp(v, reg, resp, given))

    # restricted least squares of the outcome
    design_cols = (ix if include_x else []) + is_ + iz + isb + izb
    a = v[:, design_cols]
    beta_ols = ols_solve(a.T @ a, a.T @ v[:, iy[0]])
    off = 1 if include_x else 0
    ols_x = beta_ols[0] if include_x else 0.0
    ols_s = beta_ols[off : off + q_s]
    ols_sb = beta_ols[off + q_s + q_z : off + q_s + q_z + q_sa]

    spine = _CorrectionSpine(include_x=include_x, q_s=q_s, q_sa=q_sa, q_za=q_za)
    if include_x:
        if q_sa:
            spine.sb_coef_x = B(isb, ix, is_ + iz + izb)[0]
            spine.x_coef_sbar = B(ix, isb, iz + izb + is_)[:, 0]
        if q_za:
            spine.zb_coef_x = B(izb, ix, iz + is_ + isb)[0]
        if q_s:
            spine.x_coef_s = B(ix, is_, iz + izb + isb)[:, 0]
        sxx_cm = float(ccp(v, ix, ix, iz + izb + is_ + isb)[0, 0])
    if q_s:
        base = (ix if include_x else [])
        if q_sa:
            spine.sb_coef_s = B(isb, is_, base + iz + izb)
        if q_za:
            spine.zb_coef_s = B(izb, is_, base + iz + isb)
    if q_sa and q_za:
        spine.zb_coef_sbar = B(izb, isb, (ix if include_x else []) + is_ + iz)

    u_parts = []
    if include_x:
        u_parts.append([params.zeta1 / sxx_cm * np.sign(fit.stage1_y.beta_x)])
    if q_sa:
        s_gram = ccp(v, isb, isb, (ix if include_x else []) + iz + izb + is_)
        u_parts.append(
            params.xi1
            * _solve(s_gram, fit.weights.sbar[act_sb] * np.sign(fit.stage1_y.coef_sbar[act_sb]))
        )
    else:
        u_parts.append(np.zeros(0))
    if q_za:
        z_gram = ccp(v, izb, izb, (ix if include_x else []) + is_ + isb + iz)
        u_parts.append(
            (1.0 - params.zeta1 - params.xi1)
            * _solve(z_gram, fit.weights.zbar[act_zb] * np.sign(fit.stage1_y.coef_zbar[act_zb]))
        )
    else:
        u_parts.append(np.zeros(0))
    u = np.concatenate([np.atleast_1d(p) for p in u_parts])
    m = spine.matrix()
    rhs = (
        np.concatenate([np.atleast_1d([ols_x] if include_x else []), ols_s, ols_sb])
        + n * params.lambda1 * (m @ u)
    )
    lhs = np.concatenate(
        [
            np.atleast_1d([fit.stage1_y.beta_x] if include_x else []),
            fit.stage1_y.coef_s,
            fit.stage1_y.coef_sbar[act_sb],
        ]
    )
    worst = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0

    # mediator-model relation, per column on its own active candidate set
    med = fit.stage1_m
    izb_all = data.index_of(roles.zbar).tolist()
    for j in range(med.x_row.shape[0]):
        col_active = np.nonzero(med.zbar_rows[:, j])[0]
        cols = [izb_all[i] for i in col_active]
        resp = (is_ + data.index_of(roles.sbar).tolist())[j : j + 1]
        design = v[:, ix + iz + cols]
        beta = ols_solve(design.T @ design, design.T @ v[:, resp[0]])
        correction = 0.0
        if col_active.size:
            zx = B(cols, ix, iz)[0]
            gram_zb = ccp(v, cols, cols, ix + iz)
            gamma = fit.weights.med[col_active, j]
            signs = np.sign(med.zbar_rows[col_active, j])
            correction = float(n * params.rho1 * (zx @ _solve(gram_zb, gamma * signs)))
        worst = max(worst, abs(med.x_row[j] - (beta[0] + correction)))
    return worst


class _CorrectionSpine:
    """Mutable builder for the partial-regression matrix used in verification."""

    def __init__(self, include_x: bool, q_s: int, q_sa: int, q_za: int):
        self.include_x = include_x
        self.q_s, self.q_sa, self.q_za = q_s, q_sa, q_za
        self.sb_coef_x = np.zeros(q_sa)
        self.zb_coef_x = np.zeros(q_za)
        self.x_coef_s = np.zeros(q_s)
        self.x_coef_sbar = np.zeros(q_sa)
        self.sb_coef_s = np.zeros((q_s, q_sa))
        self.zb_coef_s = np.zeros((q_s, q_za))
        self.zb_coef_sbar = np.zeros((q_sa, q_za))

    def matrix(self) -> np.ndarray:
        blocks = DebiasBlocks(
            include_x=self.include_x,
            x_coef_z=None, x_coef_zbar=None,
            x_coef_s=self.x_coef_s, x_coef_sbar=self.x_coef_sbar, x_resid_ss=None,
            sb_coef_x=self.sb_coef_x, sb_coef_s=self.sb_coef_s,
            sb_coef_z=None, sb_coef_zbar=None, sb_resid_gram=None,
            zb_coef_x=self.zb_coef_x, zb_coef_z=None, zb_coef_s=self.zb_coef_s,
            zb_coef_sbar=self.zb_coef_sbar, zb_resid_gram=None,
            zb_on_xz_coef_x=None, zb_on_xz_resid_gram=None,
        )
        return _correction_matrix(blocks, self.q_s, self.q_sa, self.q_za, self.include_x)
