"""Experiment protocols: sampler comparisons, log-determinant sweeps and metric tables.

Every run is driven by an :class:`ExperimentConfig`.  Rows go to a CSV file
whose header comments carry the seed and the full resolved configuration; a
JSON summary reports the mean and the 0.05/0.95 quantiles of every metric per
group.  Trial ``t`` uses seed ``seed + t``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cluster, datasets, evaluation, kpca, krr, nystrom, sampling, verify
from .kernel import NotPositiveDefinite, gram
from .leverage import LeverageScores, rls_exact, rls_recursive, subset_size

TASKS = ("nystrom", "kpca", "krr", "kkmeans", "precond", "verify", "sample", "rls")
SAMPLERS = ("uniform", "rls", "kdpp", "dpp")
GENERATORS = ("toy", "blobs")

#: Five imbalanced Gaussian bumps in the plane used by the ``blobs`` generator.
BLOB_SPECS = (((0.0, 0.0), 1.0, 500), ((6.0, 0.0), 0.5, 150), ((0.0, 6.0), 0.4, 100),
              ((6.0, 6.0), 0.3, 40), ((-5.0, 5.0), 0.2, 20))


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class ExperimentConfig:
    task: str = "nystrom"
    dataset: str | None = None
    data_dir: str | None = None
    target_column: str | None = None
    label_column: str | None = None
    n: int = 1000
    d: int = 2
    b: float = 20.0
    noise: float = 0.1
    sigma: float = 1.0
    lam: float = 1e-4
    samplers: tuple = ("uniform", "rls", "kdpp")
    k: int | None = None
    sweep: bool = False
    dp_min: float | None = None
    dp_max: float | None = None
    dp_count: int = 20
    prelim_draws: int = 50
    epsilon: float = 1.0
    max_iter: int | None = None
    seed: int = 0
    trials: int = 10
    n_rrls: int | None = None
    oversample: float = 2.0
    gamma: float | None = None
    cv_folds: int = 5
    quantile: float = 0.7
    n_bins: int = 10
    standardize: bool = True
    standardize_stats: str = "train"
    test_rls: str = "pooled"
    clusters: int | None = None
    restarts: int = 10
    verify_instances: int = 20
    mc_samples: int = 10_000
    delta: float = 0.1
    out: str = "results"

    #: JSON/flag names that differ from the attribute names.
    ALIASES = {"lambda": "lam"}

    def __post_init__(self):
        if isinstance(self.samplers, str):
            self.samplers = tuple(s.strip() for s in self.samplers.split(",") if s.strip())
        else:
            self.samplers = tuple(self.samplers)
        self.validate()

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError("task", f"must be one of {', '.join(TASKS)}")
        for name in ("sigma", "lam", "epsilon", "oversample", "b"):
            if not getattr(self, name) > 0:
                raise ConfigError("lambda" if name == "lam" else name, "must be positive")
        if self.noise < 0:
            raise ConfigError("noise", "must be non-negative")
        for name in ("n", "d", "trials", "dp_count", "prelim_draws", "cv_folds", "n_bins",
                     "restarts", "verify_instances", "mc_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be at least 1")
        for name in ("k", "max_iter", "n_rrls", "clusters"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(name, "must be at least 1")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma", "must be positive")
        if not 0 < self.quantile < 1:
            raise ConfigError("quantile", "must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ConfigError("delta", "must lie in (0, 1)")
        if self.standardize_stats not in ("train", "pooled"):
            raise ConfigError("standardize_stats", "must be 'train' or 'pooled'")
        if self.test_rls not in ("pooled", "test"):
            raise ConfigError("test_rls", "must be 'pooled' or 'test'")
        if not self.samplers:
            raise ConfigError("samplers", "at least one sampler is required")
        for s in self.samplers:
            if s not in SAMPLERS:
                raise ConfigError("samplers", f"unknown sampler {s!r}; choose from {', '.join(SAMPLERS)}")
        if self.task not in ("verify",) and self.dataset is None:
            raise ConfigError("dataset", "a dataset name, CSV path or generator is required")
        if self.dp_min is not None and self.dp_max is not None and self.dp_min > self.dp_max:
            raise ConfigError("dp_min", "must not exceed dp_max")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = set(cls.field_names())
        kwargs = {}
        for key, value in mapping.items():
            name = cls.ALIASES.get(key, key)
            if name not in known:
                raise ConfigError(key, "unknown configuration field")
            kwargs[name] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        d["samplers"] = list(self.samplers)
        return dict(sorted(d.items()))


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON object from ``path`` (may be ``None``) and apply ``overrides``."""
    mapping = {}
    if path is not None:
        try:
            with open(path) as fh:
                mapping = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid JSON: {exc}") from None
        if not isinstance(mapping, dict):
            raise ConfigError("config", "the configuration file must hold a JSON object")
    mapping.update(overrides or {})
    return ExperimentConfig.from_mapping(mapping)


# --------------------------------------------------------------------------- data


@dataclass
class Context:
    """Everything a trial needs: the sampling pool, its Gram matrix and scores."""

    config: ExperimentConfig
    data: datasets.DataMatrix
    K: np.ndarray
    alpha: float
    scores: LeverageScores
    k: int
    test: datasets.DataMatrix | None = None
    test_scores: np.ndarray | None = None
    _eig: tuple | None = field(default=None, repr=False)
    _esp: np.ndarray | None = field(default=None, repr=False)
    _full_eigs: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def eig(self):
        if self._eig is None:
            self._eig = sampling.ensemble_eigh(self.K, self.alpha)
        return self._eig

    @property
    def log_esp(self):
        if self._esp is None:
            self._esp = sampling.log_elementary_symmetric(self.eig[0], self.k)
        return self._esp

    @property
    def full_eigs(self):
        """Eigenvalues of ``K / n`` in decreasing order."""
        if self._full_eigs is None:
            self._full_eigs = np.linalg.eigvalsh(self.K / self.n)[::-1]
        return self._full_eigs

    @property
    def approximate(self) -> bool:
        return not self.scores.exact


def load_data(config: ExperimentConfig) -> datasets.DataMatrix:
    name = config.dataset
    if name == "toy":
        return datasets.generate_toy_regression(config.n, config.d, config.b, config.noise, config.seed)
    if name == "blobs":
        return datasets.generate_gaussian_clusters(BLOB_SPECS, config.seed)
    path = Path(name)
    if path.suffix == ".csv" or path.exists():
        return datasets.load_csv(path, target_column=config.target_column,
                                 label_column=config.label_column)
    return datasets.load_named(name, config.data_dir)


def leverage_scores(data, config: ExperimentConfig, alpha: float, K=None) -> LeverageScores:
    if config.n_rrls is not None and data.n > config.n_rrls:
        return rls_recursive(data, config.sigma, alpha, config.n_rrls, config.seed, config.oversample)
    return rls_exact(gram(data, config.sigma) if K is None else K, alpha)


def prepare(config: ExperimentConfig) -> Context:
    """Load, standardize and score the data the samplers draw from.

    For ``krr`` the data are split in half with matched leverage-score
    deciles; the training half is the sampling pool.  Both halves are
    standardized with the training statistics, or with pooled ones when
    ``standardize_stats`` is ``pooled``.
    """
    data = load_data(config)
    if config.task == "krr":
        if data.target is None:
            raise datasets.DataError("task krr needs a regression target")
        pooled = datasets.standardize(data)[0] if config.standardize else data
        pooled_scores = rls_exact(gram(pooled, config.sigma), data.n * config.lam)
        split = datasets.split_half(data, config.seed, pooled_scores)
        train, test = split.train, split.test
        if config.standardize:
            stats = datasets.standardize(train if config.standardize_stats == "train" else data)[1]
            train, _ = datasets.standardize(train, stats)
            test, _ = datasets.standardize(test, stats)
        K = gram(train, config.sigma)
        alpha = train.n * config.lam
        scores = leverage_scores(train, config, alpha, K)
        if config.test_rls == "pooled":
            both = datasets.DataMatrix(np.vstack([train.values, test.values]))
            test_scores = rls_exact(gram(both, config.sigma), alpha).scores[train.n:]
        else:
            test_scores = rls_exact(gram(test, config.sigma), alpha).scores
        k = config.k or subset_size(scores)
        return Context(config, train, K, alpha, scores, min(k, train.n), test, test_scores)
    if config.standardize:
        data = datasets.standardize(data)[0]
    K = gram(data, config.sigma)
    alpha = data.n * config.lam
    scores = leverage_scores(data, config, alpha, K)
    k = config.k or subset_size(scores)
    return Context(config, data, K, alpha, scores, min(k, data.n))


# ------------------------------------------------------------------------ sampling


def draw(sampler: str, ctx: Context, rng) -> np.ndarray:
    if sampler == "uniform":
        return sampling.sample_uniform(ctx.n, ctx.k, rng)
    if sampler == "rls":
        return sampling.sample_rls(ctx.scores, ctx.k, rng)
    if sampler == "kdpp":
        return sampling.sample_kdpp(ctx.K, ctx.alpha, ctx.k, rng, eig=ctx.eig, log_esp=ctx.log_esp)
    if sampler == "dpp":
        while True:
            C = sampling.sample_dpp(ctx.K, ctx.alpha, rng, eig=ctx.eig)
            if C.size:
                return C
    raise ValueError(f"unknown sampler {sampler!r}")


def subset_logdet(K: np.ndarray, landmarks) -> float:
    return nystrom.subset_spectrum(K[np.ix_(landmarks, landmarks)])[0]


# ------------------------------------------------------------------------- metrics


def _nan_metrics(names):
    return {k: math.nan for k in names}


METRICS = {
    "nystrom": ("lambda_min", "lambda_max", "kappa", "frob_rel_error"),
    "kpca": ("c", "recon_error", "eig_domination_gap"),
    "krr": ("gamma", "mape", "smape", "bulk_mape", "tail_mape"),
    "kkmeans": ("nmi", "inertia"),
    "precond": ("gamma", "kappa_raw", "kappa_precond", "iters_raw", "iters_precond"),
    "sample": ("landmarks",),
}


def evaluate(ctx: Context, landmarks: np.ndarray, sampler: str, rng) -> dict:
    """Task metrics for one landmark set; numerical breakdowns yield NaN."""
    task = ctx.config.task
    try:
        if task == "nystrom":
            return _nystrom_metrics(ctx, landmarks, rng)
        if task == "kpca":
            return _kpca_metrics(ctx, landmarks)
        if task == "krr":
            return _krr_metrics(ctx, landmarks, rng)
        if task == "kkmeans":
            return _kkmeans_metrics(ctx, landmarks, rng)
        if task == "precond":
            return _precond_metrics(ctx, landmarks, sampler)
        if task == "sample":
            return {"landmarks": " ".join(str(int(i)) for i in landmarks)}
    except NotPositiveDefinite:
        return _nan_metrics(METRICS[task])
    raise ValueError(f"task {task!r} has no per-subset metrics")


#: Above this many points the approximation is never formed densely.
DENSE_ERROR_LIMIT = 5000


def _nystrom_metrics(ctx, landmarks, rng):
    if ctx.n <= DENSE_ERROR_LIMIT:
        dg = nystrom.diagnostics(ctx.K, landmarks)
        err = dg.frobenius_rel_error
        lmin, lmax, kappa = dg.lambda_min, dg.lambda_max, dg.condition_number
    else:
        _, lmin, lmax, kappa = nystrom.subset_spectrum(ctx.K[np.ix_(landmarks, landmarks)])
        factor = nystrom.build(ctx.K, landmarks)
        block = min(3000, ctx.n)
        err = nystrom.frobenius_error_sampled(ctx.data, ctx.config.sigma, factor, 50, block,
                                              seed=int(rng.integers(2**31)))
        err /= np.linalg.norm(ctx.K)
    return {"lambda_min": lmin, "lambda_max": lmax, "kappa": kappa, "frob_rel_error": err}


def _kpca_metrics(ctx, landmarks):
    factor = nystrom.build(ctx.K, landmarks)
    c = kpca.half_components(factor.k)
    model = kpca.fit(factor, c)
    gap = float(np.max(model.eigvals - ctx.full_eigs[: model.eigvals.size]))
    return {"c": c, "recon_error": kpca.reconstruction_error(ctx.K, model), "eig_domination_gap": gap}


def _krr_metrics(ctx, landmarks, rng):
    cfg = ctx.config
    if cfg.gamma is not None:
        gamma = cfg.gamma
    else:
        gamma = krr.cross_validate_gamma(ctx.data, landmarks, cfg.sigma, folds=cfg.cv_folds,
                                         seed=int(rng.integers(2**31)))
    model = krr.fit(ctx.data, landmarks, cfg.sigma, gamma)
    pred = model.predict(ctx.test.values)
    y = ctx.test.target
    rep = evaluation.stratified_report(ctx.test_scores, y, pred, cfg.quantile, cfg.n_bins)
    return {"gamma": gamma, "mape": rep.overall_metric, "smape": evaluation.smape(y, pred),
            "bulk_mape": _num(rep.bulk_metric), "tail_mape": _num(rep.tail_metric)}


def _num(v):
    return math.nan if v is None else v


def _kkmeans_metrics(ctx, landmarks, rng):
    cfg = ctx.config
    if ctx.data.labels is None and cfg.clusters is None:
        raise datasets.DataError("task kkmeans needs class labels or a cluster count")
    s = cfg.clusters or np.unique(ctx.data.labels).size
    factor = nystrom.build(ctx.K, landmarks)
    if s > factor.k:
        raise ConfigError("clusters", f"{s} clusters exceed the {factor.k} landmarks")
    feats = cluster.nystrom_features(factor, s)
    res = cluster.kmeans(feats, s, cfg.restarts, seed=int(rng.integers(2**31)))
    score = cluster.nmi(res.assignments, ctx.data.labels) if ctx.data.labels is not None else math.nan
    return {"nmi": score, "inertia": res.inertia}


def _precond_metrics(ctx, landmarks, sampler):
    cfg = ctx.config
    gamma = cfg.gamma if cfg.gamma is not None else 1e-10
    factor = nystrom.build(ctx.K, landmarks)
    y = ctx.data.target if ctx.data.target is not None else np.ones(ctx.n)
    H = krr.normal_matrix(factor.k_cross, factor.chol_cc, gamma)
    d_choice = "uniform" if sampler == "uniform" else "inverse-leverage"
    pre = krr.build_preconditioner(factor.chol_cc, ctx.scores.scores[landmarks], ctx.n, gamma, d_choice)
    _, it_raw = krr.fit_pcg(factor.k_cross, factor.chol_cc, y, gamma)
    _, it_pre = krr.fit_pcg(factor.k_cross, factor.chol_cc, y, gamma, pre)
    return {"gamma": gamma, "kappa_raw": krr.condition_number(H),
            "kappa_precond": krr.condition_number(krr.preconditioned_matrix(H, pre)),
            "iters_raw": it_raw, "iters_precond": it_pre}


# ---------------------------------------------------------------------- reporting


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(config: ExperimentConfig, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={config.seed}\n")
    buf.write("# config=" + json.dumps(config.to_dict(), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def summarize(rows, group_keys, metric_keys) -> list[dict]:
    """Mean and type-7 0.05/0.95 quantiles of each metric per group (finite values only)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[g] for g in group_keys), []).append(r)
    out = []
    for key, members in groups.items():
        entry = {g: (_json_num(v) if isinstance(v, float) else v) for g, v in zip(group_keys, key)}
        stats = {}
        for m in metric_keys:
            vals = np.array([float(r[m]) for r in members if isinstance(r.get(m), (int, float, np.number))])
            finite = vals[np.isfinite(vals)]
            if finite.size:
                stats[m] = {"mean": float(finite.mean()), "q05": float(np.quantile(finite, 0.05)),
                            "q95": float(np.quantile(finite, 0.95)), "count": int(finite.size),
                            "nonfinite": int(vals.size - finite.size)}
            else:
                stats[m] = {"mean": None, "q05": None, "q95": None, "count": 0,
                            "nonfinite": int(vals.size)}
        entry["metrics"] = stats
        out.append(entry)
    return out


@dataclass
class RunResult:
    rows: list
    columns: list
    summary: dict
    paths: tuple = ()
    failed: bool = False
    lines: list = field(default_factory=list)


def _write(config: ExperimentConfig, stem: str, columns, rows, summary) -> tuple:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}_summary.json"
    csv_path.write_text(render_csv(config, columns, rows))
    summary = {"config": config.to_dict(), **summary}
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def _meta(ctx: Context) -> dict:
    return {"n": ctx.n, "alpha": ctx.alpha, "d_eff": float(np.sum(ctx.scores.scores)),
            "k": ctx.k, "exact_scores": bool(ctx.scores.exact)}


# ---------------------------------------------------------------------- protocols


def run(config: ExperimentConfig, write: bool = True) -> RunResult:
    """Sampler comparison: ``trials`` draws per sampler, one row each."""
    if config.task == "verify":
        return _run_verify(config, write)
    if config.sweep:
        return sweep_logdet(config, write)
    ctx = prepare(config)
    if config.task == "rls":
        return _run_rls(ctx, write)
    metrics = METRICS[config.task]
    rows = []
    for trial in range(config.trials):
        rng = np.random.default_rng(config.seed + trial)
        for sampler in config.samplers:
            C = draw(sampler, ctx, rng)
            row = {"trial": trial, "sampler": sampler, "k": int(C.size), "logdet": subset_logdet(ctx.K, C)}
            row.update(evaluate(ctx, C, sampler, rng))
            rows.append(row)
    rows.sort(key=lambda r: (r["trial"], config.samplers.index(r["sampler"])))
    columns = ["trial", "sampler", "k", "logdet", *metrics]
    numeric = [m for m in ("logdet", *metrics) if m != "landmarks"]
    summary = {**_meta(ctx), "groups": summarize(rows, ["sampler"], numeric)}
    paths = _write(config, config.task, columns, rows, summary) if write else ()
    return RunResult(rows, columns, summary, paths)


def preliminary_logdets(ctx: Context, draws: int, seed) -> np.ndarray:
    """Log-determinants of ``draws`` uniform and ``draws`` k-DPP subsets."""
    rng = np.random.default_rng(seed)
    vals = [subset_logdet(ctx.K, draw(s, ctx, rng)) for s in ("uniform", "kdpp") for _ in range(draws)]
    vals = np.asarray(vals)
    return vals[np.isfinite(vals)]


def sweep_targets(ctx: Context) -> np.ndarray:
    cfg = ctx.config
    lo, hi = cfg.dp_min, cfg.dp_max
    if lo is None or hi is None:
        prelim = preliminary_logdets(ctx, cfg.prelim_draws, [cfg.seed, 7919])
        q05, q95 = np.quantile(prelim, [0.05, 0.95])
        lo = q05 if lo is None else lo
        hi = q95 if hi is None else hi
    if cfg.dp_count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, cfg.dp_count)


def sweep_logdet(config: ExperimentConfig, write: bool = True, ctx: Context | None = None) -> RunResult:
    """Greedy swapping toward each target log-determinant, ``trials`` runs per target.

    Targets that are not reached within the iteration cap keep their row with
    ``converged=false``.
    """
    ctx = ctx or prepare(config)
    if config.task in ("rls", "verify"):
        raise ConfigError("sweep", f"task {config.task} has no sweep")
    metrics = METRICS[config.task]
    targets = sweep_targets(ctx)
    max_iter = config.max_iter or (5000 if ctx.approximate else 2000)
    rows = []
    for j, dp in enumerate(targets):
        for trial in range(config.trials):
            rng = np.random.default_rng([config.seed + trial, j])
            res = sampling.greedy_swap(ctx.K, ctx.scores, sampling.SwapConfig(
                ctx.k, float(dp), config.epsilon, max_iter, rng))
            row = {"target": j, "d_p": float(dp), "trial": trial, "sampler": "greedy",
                   "k": ctx.k, "logdet": res.achieved_logdet, "converged": res.converged,
                   "iterations": res.iterations}
            row.update(evaluate(ctx, res.landmarks, "greedy", rng))
            rows.append(row)
    columns = ["target", "d_p", "trial", "sampler", "k", "logdet", "converged", "iterations", *metrics]
    numeric = [m for m in ("logdet", "iterations", *metrics) if m != "landmarks"]
    summary = {**_meta(ctx), "max_iter": max_iter,
               "converged": int(sum(r["converged"] for r in rows)),
               "groups": summarize(rows, ["target", "d_p"], numeric)}
    paths = _write(config, f"{config.task}_sweep", columns, rows, summary) if write else ()
    return RunResult(rows, columns, summary, paths)


def _run_rls(ctx: Context, write: bool) -> RunResult:
    rows = [{"index": i, "score": float(s)} for i, s in enumerate(ctx.scores.scores)]
    summary = _meta(ctx)
    paths = _write(ctx.config, "rls", ["index", "score"], rows, summary) if write else ()
    return RunResult(rows, ["index", "score"], summary, paths)


def _run_verify(config: ExperimentConfig, write: bool) -> RunResult:
    results = verify.run_all_checks(config.verify_instances, config.seed, config.mc_samples, config.delta)
    rows = [{"check": r.name, "value": r.value, "threshold": r.threshold, "passed": r.passed}
            for r in results]
    failed = not all(r.passed for r in results)
    summary = {"checks": [{**r, "value": _json_num(r["value"])} for r in rows], "all_passed": not failed}
    columns = ["check", "value", "threshold", "passed"]
    paths = _write(config, "verify", columns, rows, summary) if write else ()
    return RunResult(rows, columns, summary, paths, failed, [r.line() for r in results])
