"""Command-line entry point: ``generate``, ``bounds``, ``run`` and ``episode``."""
import argparse
import csv
import json
import logging
import sys

import numpy as np

from .bounds import bound_report, compute_p_bar, u_tilde
from .env import generate_instance, load_instance, save_instance
from .errors import InstanceFormatError, ParameterError
from .experiments import (
    ENV_STREAM,
    ExperimentConfig,
    derive_seed,
    fmt,
    run_episode,
    run_suite,
    seed_schedule,
)
from .matops import spectral_radius
from .policies import POLICIES, POLICY_IDS


def _config_help():
    defaults = ExperimentConfig().to_dict()
    lines = ["config keys (JSON document, unknown keys rejected):"]
    for key, text in ExperimentConfig.HELP.items():
        lines.append(f"  {key:<22} default {json.dumps(defaults[key])}: {text}")
    return "\n".join(lines)


def load_config(path, overrides):
    doc = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise InstanceFormatError(f"{path}: config must be a JSON object")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(doc)


def cmd_generate(args):
    params = generate_instance(args.d, args.k, args.seed)
    save_instance(params, args.out)
    print(f"wrote {args.out} (d={params.d}, k={params.k}, seed={args.seed})")
    if args.info:
        print(f"spectral_radius {spectral_radius(params.gamma)!r}")
        print(f"sigma2 {params.sigma2!r}")
        print(f"trace_Z {float(np.trace(params.sigma0))!r}")
        dom = compute_p_bar(params)
        print(f"trace_P_bar {float(np.trace(dom.p_bar))!r}")
        print(f"p_bar_inflation {dom.inflation!r}")
        print(f"u_tilde {u_tilde(params, dom.p_bar)!r}")
    return 0


BOUND_FIELDS = ["n", "alpha", "nu", "theta_s", "regret_bound_per_round", "regret_bound_n",
                "u_tilde", "dominance_ok", "p_bar_inflation", "trace_p_bar", "trace_z"]


def cmd_bounds(args):
    params = load_instance(args.instance).validate()
    rep = bound_report(params, n=args.n, alpha=args.alpha, mc_samples=args.samples, seed=args.seed)
    row = {
        "n": rep.n,
        "alpha": rep.alpha,
        "nu": rep.nu,
        "theta_s": rep.theta_s,
        "regret_bound_per_round": rep.regret_bound_per_round,
        "regret_bound_n": rep.regret_bound_n,
        "u_tilde": rep.u_tilde,
        "dominance_ok": str(rep.dominance_ok).lower(),
        "p_bar_inflation": rep.inflation,
        "trace_p_bar": float(np.trace(rep.p_bar)),
        "trace_z": float(np.trace(rep.z_lyapunov)),
    }
    for key in BOUND_FIELDS:
        val = row[key]
        print(f"{key:<24} {val if isinstance(val, str) else fmt(val)}")
    if rep.inflation > 0:
        print("note: no per-action covariance dominated the others; P_bar was inflated")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BOUND_FIELDS)
            w.writerow([row[k] if isinstance(row[k], str) else fmt(row[k]) for k in BOUND_FIELDS])
    return 0


def cmd_run(args):
    cfg = load_config(args.config, {"base_seed": args.seed, "output_dir": args.out, "alpha": args.alpha})
    if args.dry_run:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        w = csv.writer(sys.stdout, lineterminator="\n")
        sched = seed_schedule(cfg)
        header = ["instance", "instance_seed", "repeat", "env_seed"] + list(cfg.policies)
        w.writerow(header)
        for row in sched:
            w.writerow([row[h] for h in header])
        return 0
    result = run_suite(cfg, workers=args.workers)
    counts = result.summary["counts"]
    print(f"instances ok {counts['instances_ok']} failed {counts['instances_failed']}")
    for name, path in result.files.items():
        print(f"wrote {path}")
    return 0 if counts["instances_failed"] == 0 else 3


EPISODE_FIELDS = ["t", "action", "reward", "pseudo_regret", "angle", "theta_bar"]


def cmd_episode(args):
    params = load_instance(args.instance).validate()
    trace = run_episode(
        params, args.policy, args.n,
        env_seed=derive_seed(args.seed, ENV_STREAM),
        policy_seed=derive_seed(args.seed, POLICY_IDS[args.policy]),
        burn_in_iters=args.burn_in,
        shadow_filter=True,
    )
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(EPISODE_FIELDS)
        for t in range(args.n):
            w.writerow([
                t,
                int(trace.action_indices[t]),
                fmt(trace.rewards[t]),
                fmt(trace.pseudo_regret[t]),
                fmt(trace.filter_angle[t]),
                fmt(trace.online_bound[t]),
            ])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser():
    defaults = ExperimentConfig()
    parser = argparse.ArgumentParser(
        prog="lgds-bandit",
        description="Simulate the Kalman-filter bandit on linear Gaussian dynamical systems.",
        epilog=_config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a random instance and write it as JSON")
    p.add_argument("--d", type=int, default=defaults.d, help="state dimension (default %(default)s)")
    p.add_argument("--k", type=int, default=defaults.k, help="number of actions (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="generation seed (default %(default)s)")
    p.add_argument("--out", required=True, help="output instance file")
    p.add_argument("--info", action="store_true", help="print spectral radius, sigma2, tr(Z), tr(P_bar) and u_tilde")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bounds", help="compute regret, angle and observability bounds for an instance")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--alpha", type=float, default=defaults.alpha, help="probability level for nu (default %(default)s)")
    p.add_argument("--n", type=int, default=defaults.n, help="horizon for the regret bound (default %(default)s)")
    p.add_argument("--samples", type=int, default=defaults.nu_samples, help="Monte Carlo draws for nu (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed for the nu estimate (default %(default)s)")
    p.add_argument("--out", help="also write a one-row CSV here")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("run", help="run a full Monte Carlo suite",
                       epilog=_config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON config document; omitted keys take the defaults below")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--out", help="override output_dir")
    p.add_argument("--alpha", type=float, help="override alpha")
    p.add_argument("--workers", type=int, default=1, help="worker processes; outputs do not depend on it (default %(default)s)")
    p.add_argument("--dry-run", action="store_true", help="print the resolved config and seed schedule, write nothing")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("episode", help="trace a single episode round by round as CSV")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--policy", choices=sorted(POLICIES), default="kode", help="policy (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="episode seed (default %(default)s)")
    p.add_argument("--n", type=int, default=100, help="rounds (default %(default)s)")
    p.add_argument("--burn-in", type=int, default=defaults.burn_in_iters, help="burn-in iterations (default %(default)s)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_episode)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceFormatError, ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
