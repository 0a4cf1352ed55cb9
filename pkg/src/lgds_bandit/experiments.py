"""Monte Carlo harness: episodes, policy tournaments and the correlation study.

Seeds are derived from ``(base_seed, instance, stream, repeat)`` so that
results do not depend on how instances are scheduled across workers.
Within one repeat every policy faces the same environment draw.
"""
import csv
import io
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .bounds import angle, bound_report, compute_p_bar, online_angle_bound
from .env import burn_in as env_burn_in
from .env import generate_instance, init_state, simulate_path
from .errors import ConvergenceError, InputError, InstabilityError, NumericError, ParameterError
from .kalman import kalman_init, kalman_update
from .policies import POLICIES, POLICY_IDS, make_policy

log = logging.getLogger(__name__)

ENV_STREAM = 101
NU_STREAM = 102
INSTANCE_STREAM = 103


def derive_seed(*keys):
    """Mix non-negative integer keys into one 64-bit seed."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class EpisodeTrace:
    policy_name: str
    action_indices: np.ndarray
    rewards: np.ndarray
    pseudo_regret: np.ndarray
    cumulative_regret: float
    filter_angle: np.ndarray | None = None
    online_bound: list | None = None


def simulate_environment(params, n, env_seed, burn_in_iters=10_000):
    """Initial draw, burn-in, then ``n`` pre-drawn rounds."""
    state = init_state(params, env_seed)
    env_burn_in(state, params, burn_in_iters)
    return simulate_path(state, params, n)


def play(params, policy, path, shadow_filter=False):
    """Run ``policy`` against a pre-drawn trajectory.

    With ``shadow_filter`` a Kalman predictor is run on the policy's own
    actions and rewards to record the state/prediction angle and the online
    angle bound each round (``nan`` / ``None`` where undefined).
    """
    n = path.z.shape[0]
    means = path.z @ params.actions.T
    best = means.max(axis=1) if n else np.zeros(0)
    actions = np.empty(n, dtype=int)
    rewards = np.empty(n)
    regret = np.empty(n)
    angles = np.full(n, np.nan) if shadow_filter else None
    bounds = [None] * n if shadow_filter else None
    kstate = kalman_init(params) if shadow_filter else None
    for t in range(n):
        decision = policy.select(t, path.z[t])
        i = decision.action_index
        x = float(means[t, i] + path.eta[t])
        if shadow_filter:
            if np.any(kstate.z_hat) and np.any(path.z[t]):
                angles[t] = angle(path.z[t], kstate.z_hat)
            if np.any(kstate.z_hat) or np.trace(kstate.p) > 0:
                bounds[t] = online_angle_bound(kstate.z_hat, kstate.p)
            kstate = kalman_update(kstate, params.actions[i], x, params)
        policy.observe(t, decision, x)
        actions[t] = i
        rewards[t] = x
        regret[t] = best[t] - means[t, i]
    return EpisodeTrace(
        policy_name=policy.name,
        action_indices=actions,
        rewards=rewards,
        pseudo_regret=regret,
        cumulative_regret=float(regret.sum()),
        filter_angle=angles,
        online_bound=bounds,
    )


def run_episode(params, policy, n, env_seed, policy_seed, burn_in_iters=10_000, hyper=None,
                z_cov=None, shadow_filter=False):
    """Simulate one episode of ``n`` rounds for the policy named ``policy``."""
    pol = make_policy(policy, params, n, policy_seed, z_cov=z_cov, **(hyper or {}))
    path = simulate_environment(params, n, env_seed, burn_in_iters)
    return play(params, pol, path, shadow_filter=shadow_filter)


def percent_regret_decrease(r_baseline, r_kode):
    """``100 (r_baseline - r_kode) / r_baseline``; ``None`` when ``r_baseline <= 0``."""
    if not r_baseline > 0:
        return None
    return 100.0 * (r_baseline - r_kode) / r_baseline


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    n_outliers: int
    n_samples: int


def boxplot_stats(samples):
    """Quartiles by linear interpolation, whiskers at the last points within 1.5 IQR."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InputError("boxplot_stats needs at least one sample")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    return BoxStats(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        n_outliers=int(x.size - inside.size),
        n_samples=int(x.size),
    )


def pearson_r(x, y, permutations=0, seed=0):
    """Product-moment correlation with a two-sided p-value.

    The p-value uses the t statistic with ``m - 2`` degrees of freedom, or
    a seeded permutation test when ``permutations > 0``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("x and y must be 1-D of equal length")
    m = x.size
    if m < 3:
        raise InputError("need at least three pairs")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise InputError("correlation undefined for zero variance")
    r = float(np.clip(dx @ dy / math.sqrt(sxx * syy), -1.0, 1.0))
    if permutations > 0:
        rng = np.random.default_rng(seed)
        norm = math.sqrt(sxx * syy)
        hits = sum(abs(dx @ rng.permutation(dy)) / norm >= abs(r) - 1e-12 for _ in range(permutations))
        return r, (hits + 1) / (permutations + 1)
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((m - 2) / (1.0 - r * r))
    return r, float(2.0 * stats.t.sf(abs(t), m - 2))


DEFAULT_ROSTER = ("kode", "random", "ucb", "sw-ucb", "rexp3", "oful")


@dataclass
class ExperimentConfig:
    """Suite dimensions, seeds, horizon, policy roster and output location."""

    d: int = 10
    k: int = 10
    n: int = 1000
    num_instances: int = 1000
    repeats_per_instance: int = 10
    burn_in_iters: int = 10_000
    base_seed: int = 0
    policies: list = field(default_factory=lambda: list(DEFAULT_ROSTER))
    policy_params: dict = field(default_factory=dict)
    alpha: float = 0.95
    nu_samples: int = 100_000
    permutations: int = 0
    output_dir: str = "results"

    HELP = {
        "d": "state dimension",
        "k": "number of actions",
        "n": "horizon (rounds per episode)",
        "num_instances": "number of random instances",
        "repeats_per_instance": "episodes per instance and policy",
        "burn_in_iters": "state iterations discarded before each episode",
        "base_seed": "root seed for every derived stream",
        "policies": f"roster; any of {sorted(POLICIES)}; percent decreases need kode",
        "policy_params": "per-policy hyperparameter overrides, e.g. {\"sw-ucb\": {\"window\": 100}}",
        "alpha": "probability level of the steady-state threshold nu",
        "nu_samples": "Monte Carlo draws used for nu",
        "permutations": "0 = t-test p-values; >0 = permutation test with that many shuffles",
        "output_dir": "directory receiving the report files",
    }

    def __post_init__(self):
        self.validate()

    def validate(self):
        for key in ("d", "n", "num_instances", "repeats_per_instance"):
            if int(getattr(self, key)) < 1:
                raise ParameterError(f"{key} must be at least 1")
        if self.k < 2:
            raise ParameterError("k must be at least 2")
        if self.burn_in_iters < 0 or self.permutations < 0:
            raise ParameterError("burn_in_iters and permutations must be non-negative")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if self.nu_samples < 10**4:
            raise ParameterError("nu_samples must be at least 1e4")
        unknown = [p for p in self.policies if p not in POLICIES]
        if unknown:
            raise ParameterError(f"unknown policies {unknown}; choose from {sorted(POLICIES)}")
        if not self.policies:
            raise ParameterError("roster is empty")
        if len(set(self.policies)) != len(self.policies):
            raise ParameterError("roster has duplicates")
        for name, hyper in self.policy_params.items():
            if name not in self.policies:
                raise ParameterError(f"policy_params given for {name!r}, which is not in the roster")
            bad = set(hyper) - set(POLICIES[name].defaults)
            if bad:
                raise ParameterError(f"unknown hyperparameters for {name}: {sorted(bad)}")
        return self

    @property
    def baselines(self):
        """Policies compared against KODE; empty when KODE is not in the roster."""
        if "kode" not in self.policies:
            return []
        return [p for p in self.policies if p not in ("kode", "oracle")]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        unknown = set(doc) - set(cls.HELP)
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(eq=False)
class InstanceResult:
    index: int
    seed: int
    report: object = None
    mean_regret: dict = field(default_factory=dict)
    percent_decrease: dict = field(default_factory=dict)
    error: str | None = None


def instance_seed(config, i):
    return derive_seed(config.base_seed, INSTANCE_STREAM, i)


def seed_schedule(config):
    """Seeds every instance/repeat/policy would use, for dry runs."""
    rows = []
    for i in range(config.num_instances):
        for r in range(config.repeats_per_instance):
            row = {"instance": i, "instance_seed": instance_seed(config, i), "repeat": r,
                   "env_seed": derive_seed(config.base_seed, i, ENV_STREAM, r)}
            for p in config.policies:
                row[p] = derive_seed(config.base_seed, i, POLICY_IDS[p], r)
            rows.append(row)
    return rows


def run_instance(config, i):
    """Generate instance ``i``, compute its bounds and run the whole roster."""
    seed = instance_seed(config, i)
    res = InstanceResult(index=i, seed=seed)
    try:
        params = generate_instance(config.d, config.k, seed)
        z_cov = params.sigma0
        report = bound_report(
            params,
            n=config.n,
            alpha=config.alpha,
            mc_samples=config.nu_samples,
            seed=derive_seed(config.base_seed, i, NU_STREAM),
            dominant=compute_p_bar(params),
            z_cov=z_cov,
        )
        totals = dict.fromkeys(config.policies, 0.0)
        for r in range(config.repeats_per_instance):
            path = simulate_environment(
                params, config.n, derive_seed(config.base_seed, i, ENV_STREAM, r), config.burn_in_iters
            )
            for name in config.policies:
                pol = make_policy(
                    name, params, config.n, derive_seed(config.base_seed, i, POLICY_IDS[name], r),
                    z_cov=z_cov, **config.policy_params.get(name, {}),
                )
                totals[name] += play(params, pol, path).cumulative_regret
    except (ConvergenceError, NumericError, InstabilityError, np.linalg.LinAlgError) as exc:
        log.warning("instance %d (seed %d) failed: %s", i, seed, exc)
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    res.report = report
    res.mean_regret = {p: totals[p] / config.repeats_per_instance for p in config.policies}
    kode = res.mean_regret.get("kode")
    res.percent_decrease = {b: percent_regret_decrease(res.mean_regret[b], kode) for b in config.baselines}
    return res


def _run_instance_star(args):
    return run_instance(*args)


def run_instances(config, workers=1):
    """Run every instance; results are ordered by instance index."""
    jobs = [(config, i) for i in range(config.num_instances)]
    if workers <= 1:
        results = [run_instance(c, i) for c, i in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_instance_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return sorted(results, key=lambda r: r.index)


def fmt(x):
    """Full-precision CSV number; ``NA`` for missing values."""
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "NA"
    return repr(x)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


@dataclass(eq=False)
class SuiteResult:
    config: ExperimentConfig
    instances: list
    boxplots: dict
    correlations: list
    summary: dict
    files: dict


def summarize(config, results):
    """Aggregate instance results into box statistics and correlation rows."""
    ok = [r for r in results if r.error is None]
    failed = [r for r in results if r.error is not None]
    boxplots, excluded = {}, {}
    for b in config.baselines:
        samples = [(r.index, r.percent_decrease[b]) for r in ok if r.percent_decrease[b] is not None]
        excluded[b] = len(ok) - len(samples)
        boxplots[b] = (samples, boxplot_stats([v for _, v in samples]) if samples else None)

    positive_u = [r for r in ok if r.report.u_tilde > 0]
    zero_u = len(ok) - len(positive_u)
    correlations = []
    groups = [(b, lambda r, b=b: r.percent_decrease[b]) for b in config.baselines]

    def mean_decrease(r):
        vals = [v for v in r.percent_decrease.values() if v is not None]
        return float(np.mean(vals)) if vals else None

    if config.baselines:
        groups.append(("mean_over_baselines", mean_decrease))
    for label, getter in groups:
        pairs = [(math.log10(r.report.u_tilde), getter(r)) for r in positive_u if getter(r) is not None]
        row = {"baseline": label, "r": None, "p_value": None, "m": len(pairs),
               "excluded_zero_u": zero_u, "excluded_undefined": len(positive_u) - len(pairs),
               "r_at_least_0_4": None}
        if len(pairs) >= 3:
            x, y = np.array(pairs).T
            try:
                r_val, p_val = pearson_r(x, y, permutations=config.permutations,
                                         seed=derive_seed(config.base_seed, len(correlations)))
                row.update(r=r_val, p_value=p_val, r_at_least_0_4=r_val >= 0.4)
            except InputError as exc:
                log.warning("correlation for %s undefined: %s", label, exc)
        correlations.append(row)

    summary = {
        "config": config.to_dict(),
        "counts": {
            "instances_requested": config.num_instances,
            "instances_ok": len(ok),
            "instances_failed": len(failed),
            "failures": [{"instance": r.index, "seed": r.seed, "error": r.error} for r in failed],
            "excluded_percent_decrease": excluded,
            "excluded_zero_u_tilde": zero_u,
            "p_bar_inflated": sum(1 for r in ok if r.report.inflation > 0),
        },
        "median_percent_decrease": {b: (s.median if s else None) for b, (_, s) in boxplots.items()},
        "policy_hyperparameters": {p: config.policy_params.get(p, {}) for p in config.policies},
        "hyperparameter_note": "omitted hyperparameters use instance-derived defaults",
        "versions": {
            "lgds_bandit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    return boxplots, correlations, summary


def render_reports(config, results):
    """Return ``{filename: text}`` for every report file."""
    boxplots, correlations, summary = summarize(config, results)
    header = ["instance", "seed", "u_tilde", "log10_u_tilde", "nu", "theta_s",
              "regret_bound_per_round", "regret_bound_n", "p_bar_inflation"]
    header += [f"mean_regret_{p}" for p in config.policies]
    header += [f"pct_decrease_{b}" for b in config.baselines]
    rows = []
    for r in results:
        if r.error is not None:
            continue
        rep = r.report
        log_u = math.log10(rep.u_tilde) if rep.u_tilde > 0 else None
        row = [r.index, r.seed, rep.u_tilde, log_u, rep.nu, rep.theta_s,
               rep.regret_bound_per_round, rep.regret_bound_n, rep.inflation]
        row += [r.mean_regret[p] for p in config.policies]
        row += [r.percent_decrease[b] for b in config.baselines]
        rows.append(row)
    files = {"instances.csv": _csv_text(header, rows)}
    for b, (samples, st) in boxplots.items():
        brow = [("sample", idx, v) for idx, v in samples]
        if st is not None:
            for key in ("median", "q1", "q3", "whisker_low", "whisker_high", "n_outliers", "n_samples"):
                brow.append((key, "NA", getattr(st, key)))
        files[f"boxplot_{b}.csv"] = _csv_text(["record", "instance", "value"], brow)
    corr_header = ["baseline", "r", "p_value", "m", "excluded_zero_u", "excluded_undefined", "r_at_least_0_4"]
    corr_rows = [[c[h] if not isinstance(c[h], bool) else str(c[h]).lower() for h in corr_header]
                 for c in correlations]
    files["correlation.csv"] = _csv_text(corr_header, corr_rows)
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    return files, boxplots, correlations, summary


def run_suite(config, workers=1, out_dir=None):
    """Run the full tournament and write the report files.

    Returns a :class:`SuiteResult`; ``out_dir`` defaults to
    ``config.output_dir``.
    """
    out_dir = config.output_dir if out_dir is None else out_dir
    results = run_instances(config, workers)
    files, boxplots, correlations, summary = render_reports(config, results)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[name] = path
    if summary["counts"]["instances_failed"]:
        log.warning("%d of %d instances failed", summary["counts"]["instances_failed"], config.num_instances)
    return SuiteResult(config, results, boxplots, correlations, summary, paths)
