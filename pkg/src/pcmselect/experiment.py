"""Monte Carlo benchmark harness.

Runs every configured estimator over many replications drawn from one of the
benchmark models (or a user-supplied model), collecting per-replication
estimates and per-method summary statistics (mean, standard deviation, bias,
sign-coincidence rate, failure count).

Determinism: the master seed feeds a seed sequence whose first child builds
the model (fixing the random coefficients, the covariate correlation matrix,
and hence the true effect for the whole run) and whose remaining children
seed the replications.  Results are keyed by replication index, so the
output is byte-identical regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import back_door_estimate, baseline_penalized, front_door_like_estimate
from .data import Dataset, RolePartition
from .errors import ConfigInvalid, EmptyInput, PcmSelectError
from .graphs import minimal_mediator_sets
from .pcm import PcmParams, pcm_total_effect
from .scm import CovarianceSpec, LinearScm, build_experiment_scm, coupling_dag

__all__ = [
    "MethodSpec",
    "ExperimentConfig",
    "SummaryRow",
    "McResult",
    "run_monte_carlo",
    "summarize",
    "experiment_roles",
    "PRESETS",
    "SETTING_METHODS",
    "WORKERS_ENV_VAR",
]

WORKERS_ENV_VAR = "PCMSELECT_WORKERS"

SETTING_METHODS = {
    "A": (
        "lasso",
        "adaptive-lasso",
        "elastic-net",
        "pal1ma",
        "pcm",
        "frontdoor-including-x",
        "frontdoor-not-including-x",
        "backdoor",
    ),
    "B": ("pcm", "frontdoor-minimal", "frontdoor-whole"),
}

ALL_METHODS = tuple(dict.fromkeys(SETTING_METHODS["A"] + SETTING_METHODS["B"]))

# Published benchmark parameter values (selected by cross-validation there);
# the debiasing-ridge settings are this package's defaults.
PRESETS: dict[tuple[str, str], dict] = {
    ("A", "lasso"): {"lam": 0.407},
    ("A", "adaptive-lasso"): {"lam": 0.407, "eta": 0.100, "pilot_lam": 3.157},
    ("A", "elastic-net"): {"lam": 0.399, "phi": 0.910},
    ("A", "pal1ma"): {"lam": 0.294, "eta": 1.200, "pilot_lam": 3.157},
    ("A", "pcm"): {
        "lambda1": 0.017, "rho1": 0.213, "zeta1": 0.270, "xi1": 0.190,
        "pilot_lambda": 3.157, "pilot_rho": 69.484,
    },
    ("A", "frontdoor-including-x"): {},
    ("A", "frontdoor-not-including-x"): {},
    ("A", "backdoor"): {},
    ("B", "pcm"): {
        "lambda1": 0.346, "rho1": 0.0, "zeta1": 0.0, "xi1": 1.0,
        "pilot_lambda": 3.726, "pilot_rho": 3.726,
    },
    ("B", "frontdoor-minimal"): {},
    ("B", "frontdoor-whole"): {},
}


def experiment_roles(setting: str) -> RolePartition:
    """Role partition of the benchmark models (setting B hides the covariates)."""
    setting = setting.upper()
    sbar = tuple(f"Sbar{i}" for i in range(1, 6))
    if setting == "A":
        return RolePartition(
            x="X", y="Y", z=("Z",),
            zbar=tuple(f"Zbar{i}" for i in range(1, 11)),
            s=("S",), sbar=sbar,
        )
    if setting == "B":
        return RolePartition(x="X", y="Y", s=("S",), sbar=sbar)
    raise ConfigInvalid(f"unknown setting {setting!r}")


@dataclass(frozen=True)
class MethodSpec:
    """One estimator to run: its name, display label, and parameters.

    ``params=None`` means "use the preset for this setting".
    """

    name: str
    params: dict | None = None
    label: str | None = None

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class ExperimentConfig:
    setting: str  # "A", "B", or "custom"
    n: int
    replications: int
    seed: int
    methods: tuple[MethodSpec, ...]
    workers: int | None = None
    scm_payload: dict | None = None  # custom setting only
    roles: RolePartition | None = None  # custom setting only

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        setting = self.setting.upper() if self.setting.lower() != "custom" else "custom"
        object.__setattr__(self, "setting", setting)
        if self.n < 3:
            raise ConfigInvalid("n must be at least 3")
        if self.replications < 1:
            raise ConfigInvalid("replications must be at least 1")
        if not self.methods:
            raise ConfigInvalid("configure at least one method")
        labels = [m.display for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigInvalid("method labels must be unique")
        for m in self.methods:
            if m.name not in ALL_METHODS:
                raise ConfigInvalid(f"unknown method {m.name!r}")
        if setting in ("A", "B"):
            allowed = SETTING_METHODS[setting]
            for m in self.methods:
                if m.name not in allowed:
                    raise ConfigInvalid(
                        f"method {m.name!r} is not available in setting {setting}"
                        + (" (covariates are unobserved)" if setting == "B" else "")
                    )
        elif setting == "custom":
            if self.scm_payload is None or self.roles is None:
                raise ConfigInvalid("custom setting needs an scm payload and roles")
        else:
            raise ConfigInvalid(f"unknown setting {self.setting!r}")

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentConfig":
        try:
            methods = tuple(
                MethodSpec(
                    name=m["name"],
                    params=m.get("params"),
                    label=m.get("label"),
                )
                for m in payload["methods"]
            )
            roles = payload.get("roles")
            return ExperimentConfig(
                setting=str(payload["setting"]),
                n=int(payload["n"]),
                replications=int(payload["replications"]),
                seed=int(payload["seed"]),
                methods=methods,
                workers=payload.get("workers"),
                scm_payload=payload.get("scm"),
                roles=RolePartition.from_dict(roles) if roles else None,
            )
        except KeyError as exc:
            raise ConfigInvalid(f"experiment config is missing field {exc}") from exc


@dataclass(frozen=True)
class SummaryRow:
    """Per-method Monte Carlo statistics over the successful replications."""

    method: str
    mean: float
    sd: float
    bias: float
    sign: float
    failures: int
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class McResult:
    true_tau: float
    summaries: tuple[SummaryRow, ...]
    estimates: tuple[tuple[int, str, float], ...]  # (replication, method, estimate)


def summarize(estimates, true_tau: float) -> tuple[float, float, float, float]:
    """(mean, sd, bias, sign rate) of a list of estimates against the truth.

    The standard deviation uses the 1/(N-1) convention (0 for a single
    estimate).  The sign rate counts estimates whose sign matches the
    truth's; an exactly zero estimate counts as a match only when the truth
    is zero.
    """
    values = np.asarray(list(estimates), dtype=float)
    if values.size == 0:
        raise EmptyInput("summarize needs at least one estimate")
    mean = float(values.mean())
    sd = 0.0 if values.size == 1 else float(values.std(ddof=1))
    sign = float(np.mean(np.sign(values) == np.sign(true_tau)))
    return mean, sd, mean - true_tau, sign


# -- per-replication execution -----------------------------------------------------


def _resolve_methods(config: ExperimentConfig, scm: LinearScm,
                     roles: RolePartition) -> list[tuple[str, str, dict]]:
    """Materialize (label, name, params) triples, resolving presets/minimal sets."""
    parameter_free = {name for name in ALL_METHODS if name.startswith(("backdoor", "frontdoor"))}
    resolved = []
    for m in config.methods:
        params = m.params
        if params is None:
            key = (config.setting, m.name)
            if key in PRESETS:
                params = PRESETS[key]
            elif m.name in parameter_free:
                params = {}
            else:
                raise ConfigInvalid(
                    f"no preset parameters for method {m.name!r} in setting "
                    f"{config.setting!r}; supply params explicitly"
                )
        params = dict(params)
        if m.name == "frontdoor-minimal" and "mediators" not in params:
            sets = minimal_mediator_sets(
                coupling_dag(scm), roles.x, roles.y, roles.covariates
            )
            if not sets:
                raise ConfigInvalid(
                    "no mediator set satisfies the front-door-like criterion"
                )
            params["mediators"] = sorted(sets[0])
        resolved.append((m.display, m.name, params))
    return resolved


def _estimate_one(ds: Dataset, roles: RolePartition, name: str, params: dict) -> float:
    if name == "pcm":
        return pcm_total_effect(ds, roles, PcmParams(**params)).total_effect
    if name in ("lasso", "adaptive-lasso", "elastic-net", "pal1ma"):
        return baseline_penalized(ds, roles, name.replace("-", "_"), **params)
    if name == "backdoor":
        z = params.get("z", roles.covariates)
        return back_door_estimate(ds, roles.x, roles.y, z)
    if name.startswith("frontdoor"):
        if name == "frontdoor-whole":
            mediators = params.get("mediators", roles.mediators)
            z1 = params.get("z1", ())
            z2 = params.get("z2", ())
        elif name == "frontdoor-minimal":
            mediators = params["mediators"]
            z1 = params.get("z1", ())
            z2 = params.get("z2", ())
        else:
            mediators = params.get("mediators", roles.s)
            z1 = params.get("z1", roles.covariates)
            z2 = params.get("z2", roles.covariates)
        include_x = name != "frontdoor-not-including-x"
        return front_door_like_estimate(
            ds, roles.x, roles.y, mediators, z1, z2,
            include_x_in_second_stage=include_x,
        )
    raise ConfigInvalid(f"unknown method {name!r}")


def _replication_worker(payload) -> tuple[int, list[tuple[str, float | None]]]:
    rep, seed, scm, spec, roles, n, methods = payload
    rng = np.random.default_rng(seed)
    raw = scm.sample(n, rng, spec)
    observed = roles.required_columns()
    cols = [scm.dag.vertices.index(c) for c in observed]
    results: list[tuple[str, float | None]] = []
    try:
        ds = Dataset(raw[:, cols], observed).standardized()
    except PcmSelectError:
        return rep, [(label, None) for label, _, _ in methods]
    for label, name, params in methods:
        try:
            results.append((label, _estimate_one(ds, roles, name, params)))
        except PcmSelectError:
            results.append((label, None))
    return rep, results


def _build_model(config: ExperimentConfig, model_seed) -> tuple[LinearScm, CovarianceSpec | None, RolePartition, float]:
    if config.setting in ("A", "B"):
        scm, spec, tau = build_experiment_scm(config.setting, np.random.default_rng(model_seed))
        return scm, spec, experiment_roles(config.setting), tau
    scm, spec = LinearScm.from_dict(config.scm_payload)
    roles = config.roles
    tau = scm.true_total_effect(roles.x, roles.y)
    return scm, spec, roles, tau


def run_monte_carlo(config: ExperimentConfig) -> McResult:
    """Execute the configured experiment; never aborts on failing replications.

    Replications where an estimator raises a library error are excluded from
    that method's statistics and counted in its ``failures`` column.
    """
    ss = np.random.SeedSequence(config.seed)
    children = ss.spawn(config.replications + 1)
    scm, spec, roles, tau = _build_model(config, children[0])
    methods = _resolve_methods(config, scm, roles)
    payloads = [
        (rep, children[rep + 1], scm, spec, roles, config.n, methods)
        for rep in range(config.replications)
    ]
    workers = config.workers
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    workers = max(1, workers)
    if workers == 1 or config.replications == 1:
        raw_results = [_replication_worker(p) for p in payloads]
    else:
        chunk = max(1, config.replications // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw_results = list(pool.map(_replication_worker, payloads, chunksize=chunk))
    raw_results.sort(key=lambda item: item[0])

    estimates: list[tuple[int, str, float]] = []
    per_method: dict[str, list[float]] = {label: [] for label, _, _ in methods}
    fail_count: dict[str, int] = {label: 0 for label, _, _ in methods}
    for rep, row in raw_results:
        for label, value in row:
            if value is None:
                fail_count[label] += 1
            else:
                estimates.append((rep, label, float(value)))
                per_method[label].append(float(value))
    summaries = []
    for label, name, params in methods:
        values = per_method[label]
        if values:
            mean, sd, bias, sign = summarize(values, tau)
        else:
            mean = sd = bias = sign = float("nan")
        summaries.append(
            SummaryRow(
                method=label, mean=mean, sd=sd, bias=bias, sign=sign,
                failures=fail_count[label], params=params,
            )
        )
    return McResult(true_tau=tau, summaries=tuple(summaries), estimates=tuple(estimates))
