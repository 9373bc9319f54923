"""Command-line entry point: ``activepercept <command> ...``.

Exit codes: 0 success, 1 validation or usage error, 2 numerical check
failure (or aborted training), 3 enumeration budget refused.

Every command writes a JSON run manifest (``--manifest``, by default next to
the primary output). ``activepercept rerun MANIFEST`` re-executes the
recorded command line and verifies the artifacts hash identically.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import gradcheck
from .exceptions import (
    ActivePerceptError,
    BudgetExceeded,
    CompileError,
    TrainingAborted,
)
from .gradient import exact_gradient, sampled_gradient
from .gridworld import compile_gridworld, load_spec, paper_environment
from .hmm import load_hmm, save_hmm
from .inference import (
    DEFAULT_BUDGET,
    ObservationRecord,
    entropy_given_observation,
    exact_conditional_entropy,
    posterior,
    support_forward,
)
from .optimizer import (
    TrainConfig,
    estimate_entropy,
    random_policy_search,
    train,
)
from .policy import FiniteStatePolicy, load_policy, save_policy
from .simulator import sample_arrays

SEED_ENV = "ACTIVEPERCEPT_SEED"

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3

# defaults of the grid-world experiment
DEFAULT_MEMORY, DEFAULT_HORIZON, DEFAULT_SAMPLES = 2, 10, 2000
DEFAULT_STEP, DEFAULT_ITERS = 0.5, 2000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class Manifest:
    """Run manifest written before the run and finalized after it."""

    def __init__(self, path, command, argv, config, seed):
        self.path = Path(path)
        self.doc = {
            "format": "run-manifest-v1",
            "command": command,
            "argv": list(argv),
            "config": config,
            "seed": seed,
            "cwd": os.getcwd(),
            "tool_version": __version__,
            "started": _now(),
            "finished": None,
            "status": "running",
            "artifacts": {},
        }
        self._write()

    def _write(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w") as fh:
            json.dump(self.doc, fh, indent=1, default=_jsonable)
            fh.write("\n")

    def finalize(self, status, artifacts=(), **extra):
        self.doc["finished"] = _now()
        self.doc["status"] = status
        self.doc["artifacts"] = {str(p): _sha256(p) for p in artifacts if Path(p).exists()}
        self.doc.update(extra)
        self._write()


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not serializable: {type(x)}")


def _resolve_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        return int(env)
    return secrets.randbits(32)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _resolve_initial(hmm, value):
    """Initial state from a state label, a type-name prefix or a state index."""
    support = [int(s) for s in hmm.initial_support]
    labels = hmm.state_labels or tuple(str(i) for i in range(hmm.num_states))
    for s in support:
        if labels[s] == value or labels[s].split("@")[0] == value:
            return s
    if value in labels:
        raise ActivePerceptError(f"state {value!r} has zero prior probability")
    try:
        s = int(value)
    except ValueError:
        raise ActivePerceptError(f"unknown initial state {value!r}") from None
    if s not in support:
        raise ActivePerceptError(f"state {value!r} has zero prior probability")
    return s


# --- commands ---------------------------------------------------------------

def cmd_compile(args):
    spec = paper_environment() if args.spec in ("bundled", "paper") else load_spec(args.spec)
    env = compile_gridworld(spec)
    out = Path(args.out)
    save_hmm(env.hmm, out)
    sidecar = out.with_suffix(".states.json")
    _write_json(sidecar, env.sidecar())
    if args.export_spec:
        _write_json(args.export_spec, spec.to_dict())
    h = env.hmm
    print(f"states {h.num_states} observations {h.num_observations} "
          f"actions {h.num_actions} initial {len(h.initial_support)}")
    return EXIT_OK, [out, sidecar] + ([Path(args.export_spec)] if args.export_spec else [])


def _train_config(args, seed):
    return TrainConfig(
        horizon=args.horizon, samples_per_iter=args.samples, iterations=args.iters,
        step_size=args.step_size, seed=seed, gradient_mode=args.mode,
        log_every=args.log_every, early_stop_tol=args.early_stop,
        eval_samples=args.eval_samples, baseline=args.baseline,
        threads=args.threads, budget=args.budget)


def cmd_train(args):
    hmm = load_hmm(args.hmm)
    config = _train_config(args, args.seed)
    if args.init:
        policy = load_policy(args.init)
    else:
        policy = FiniteStatePolicy.for_hmm(hmm, args.memory)
    artifacts = [Path(args.out_policy), Path(args.out_log)]
    try:
        trained, log = train(hmm, policy, config)
    except TrainingAborted as exc:
        exc.log.write_csv(args.out_log, include_time=args.record_time)
        snapshot = Path(args.out_policy).with_suffix(".aborted.json")
        save_policy(policy.with_theta(exc.theta), snapshot)
        print(f"training aborted: {exc} (batch seed {exc.batch_seed}); "
              f"theta snapshot in {snapshot}", file=sys.stderr)
        return EXIT_NUMERIC, [Path(args.out_log), snapshot]
    save_policy(trained, args.out_policy)
    log.write_csv(args.out_log, include_time=args.record_time)
    last = log.entries[-1] if log.entries else None
    if last is not None:
        print(f"iterations {last.iteration + 1} entropy_bits {last.entropy_bits:.6f} "
              f"grad_inf_norm {last.grad_inf_norm:.3e}"
              + (" converged" if log.converged else ""))
    return EXIT_OK, artifacts


def cmd_eval(args):
    hmm = load_hmm(args.hmm)
    policy = load_policy(args.policy)
    s0 = _resolve_initial(hmm, args.true_type) if args.true_type is not None else None
    batch = sample_arrays(hmm, policy, args.horizon, args.episodes, args.seed,
                          threads=args.threads, initial_state=s0)
    _, path = support_forward(hmm, batch.o, batch.a, keep_path=True)
    support = hmm.initial_support
    header = (["episode", "t", "s0_true"]
              + [f"p_{hmm.state_label(s)}" for s in support] + ["entropy_bits"])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for e in range(len(batch)):
            truth = hmm.state_label(batch.states[e, 0])
            for t in range(path.shape[1]):
                row = path[e, t]
                writer.writerow([e, t, truth] + [repr(float(p)) for p in row]
                                + [repr(entropy_given_observation(row))])
    final = path[:, -1]
    idx = np.searchsorted(support, batch.states[:, 0])
    mass = final[np.arange(len(batch)), idx]
    print(f"episodes {len(batch)} mean_final_true_mass {mass.mean():.6f}")
    return EXIT_OK, [Path(args.out)]


def cmd_gradcheck(args):
    hmm = load_hmm(args.hmm)
    policy = load_policy(args.policy)
    report = gradcheck(hmm, policy, args.horizon, epsilon=args.epsilon,
                       records=args.records, seed=args.seed,
                       tolerance=args.tolerance, budget=args.budget)
    text = "\n".join(report.lines())
    print(text)
    artifacts = []
    if args.out:
        Path(args.out).write_text(text + "\n")
        artifacts.append(Path(args.out))
    return (EXIT_OK if report.passed else EXIT_NUMERIC), artifacts


def cmd_entropy(args):
    hmm = load_hmm(args.hmm)
    policy = load_policy(args.policy)
    if args.mode == "exact":
        value = exact_conditional_entropy(hmm, policy, args.horizon, args.budget)
        doc = {"mode": "exact", "entropy_bits": value}
        print(f"entropy_bits {value:.10f}")
    else:
        value, se = estimate_entropy(hmm, policy, args.horizon, args.samples,
                                     args.seed, args.threads)
        doc = {"mode": "sampled", "entropy_bits": value, "stderr": se, "M": args.samples}
        print(f"entropy_bits {value:.10f} stderr {se:.3e} M {args.samples}")
    if args.out:
        _write_json(args.out, doc)
        return EXIT_OK, [Path(args.out)]
    return EXIT_OK, []


def cmd_gradient(args):
    hmm = load_hmm(args.hmm)
    policy = load_policy(args.policy)
    if args.mode == "exact":
        est = exact_gradient(hmm, policy, args.horizon, args.budget)
    else:
        est = sampled_gradient(hmm, policy, args.horizon, args.samples, args.seed,
                               baseline=args.baseline, threads=args.threads)
    _write_json(args.out, est.to_dict(policy))
    print(f"entropy_bits {est.entropy_estimate:.10f} "
          f"grad_inf_norm {float(np.max(np.abs(est.vector))):.3e}")
    return EXIT_OK, [Path(args.out)]


def cmd_sample(args):
    hmm = load_hmm(args.hmm)
    policy = load_policy(args.policy)
    batch = sample_arrays(hmm, policy, args.horizon, args.samples, args.seed,
                          threads=args.threads)
    with open(args.out, "w") as fh:
        for traj in batch.trajectories():
            fh.write(json.dumps(traj.to_dict(hmm)) + "\n")
    return EXIT_OK, [Path(args.out)]


def cmd_posterior(args):
    hmm = load_hmm(args.hmm)
    lines = []
    with open(args.records) as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = ObservationRecord.from_dict(hmm, json.loads(line))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ActivePerceptError(f"{args.records}:{n}: {exc}") from None
            post = posterior(hmm, None, record)
            lines.append(json.dumps({"posterior": post.as_dict(hmm),
                                     "entropy_bits": entropy_given_observation(post)}))
    Path(args.out).write_text("".join(x + "\n" for x in lines))
    return EXIT_OK, [Path(args.out)]


def cmd_search(args):
    hmm = load_hmm(args.hmm)
    result = random_policy_search(hmm, args.horizon, args.trials, args.seed,
                                  memory_length=args.memory, samples=args.samples,
                                  mode=args.mode, threads=args.threads, budget=args.budget)
    save_policy(result.policy, args.out_policy)
    print(f"best_trial {result.best_index} entropy_bits {result.entropy:.6f}")
    return EXIT_OK, [Path(args.out_policy)]


def cmd_rerun(args):
    with open(args.manifest) as fh:
        doc = json.load(fh)
    argv = list(doc["argv"])
    if "--manifest" in argv:
        i = argv.index("--manifest")
        del argv[i:i + 2]
    if args.threads is not None and "threads" in doc.get("config", {}):
        if "--threads" in argv:
            argv[argv.index("--threads") + 1] = str(args.threads)
        else:
            argv += ["--threads", str(args.threads)]
    rerun_manifest = str(Path(args.manifest).resolve().with_suffix(".rerun.json"))
    here = os.getcwd()
    os.chdir(doc.get("cwd", here))
    try:
        code = main(argv + ["--manifest", rerun_manifest])
        mismatched = [path for path, digest in doc.get("artifacts", {}).items()
                      if not Path(path).exists() or _sha256(path) != digest]
    finally:
        os.chdir(here)
    for path in mismatched:
        print(f"MISMATCH {path}")
    print("REPRODUCED" if not mismatched and code == EXIT_OK else "NOT REPRODUCED")
    return (EXIT_OK if not mismatched and code == EXIT_OK else EXIT_NUMERIC), []


# --- parser -----------------------------------------------------------------

def _common(p, seed=False, horizon=False, threads=False, budget=False):
    p.add_argument("--manifest", help="run manifest path")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help=f"root seed (falls back to ${SEED_ENV}, then a random draw)")
    if horizon:
        p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    if threads:
        p.add_argument("--threads", type=int, default=1)
    if budget:
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="maximum number of enumerated records")


def build_parser():
    parser = _Parser(prog="activepercept", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile a grid-world spec into a cehmm-v1 file")
    p.add_argument("spec", help="spec JSON file, or 'bundled' for the bundled 6x4 environment")
    p.add_argument("--out", required=True)
    p.add_argument("--export-spec", help="also write the resolved spec JSON here")
    _common(p)
    p.set_defaults(func=cmd_compile, primary="out")

    p = sub.add_parser("train", help="policy-gradient training")
    p.add_argument("hmm")
    p.add_argument("--out-policy", required=True)
    p.add_argument("--out-log", required=True)
    p.add_argument("--init", help="initial fsp-v1 policy (default: zeros)")
    p.add_argument("--memory", type=int, default=DEFAULT_MEMORY)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--step-size", type=float, default=DEFAULT_STEP)
    p.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    p.add_argument("--mode", choices=["sampled", "exact"], default="sampled")
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--early-stop", type=float, default=None,
                   help="stop when the gradient sup-norm falls below this value")
    p.add_argument("--eval-samples", type=int, default=None,
                   help="log entropy from an independent batch of this size")
    p.add_argument("--baseline", action="store_true",
                   help="subtract a leave-one-out mean entropy (variance reduction)")
    p.add_argument("--record-time", action="store_true",
                   help="fill the seconds column (makes logs run-dependent)")
    _common(p, seed=True, horizon=True, threads=True, budget=True)
    p.set_defaults(func=cmd_train, primary="out_policy")

    p = sub.add_parser("eval", help="posterior belief trajectories along sampled episodes")
    p.add_argument("hmm")
    p.add_argument("policy")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--true-type", default=None,
                   help="fix the initial state (label, type name or state index)")
    p.add_argument("--out", required=True)
    _common(p, seed=True, horizon=True, threads=True)
    p.set_defaults(func=cmd_eval, primary="out")

    p = sub.add_parser("gradcheck", help="verify gradient, score and posterior identities")
    p.add_argument("hmm")
    p.add_argument("policy")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--records", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    _common(p, seed=True, horizon=True, threads=True, budget=True)
    p.set_defaults(func=cmd_gradcheck, primary="out")

    p = sub.add_parser("entropy", help="conditional entropy of a policy")
    p.add_argument("hmm")
    p.add_argument("policy")
    p.add_argument("--mode", choices=["exact", "sampled"], default="sampled")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--out", default=None)
    _common(p, seed=True, horizon=True, threads=True, budget=True)
    p.set_defaults(func=cmd_entropy, primary="out")

    p = sub.add_parser("gradient", help="dump an entropy gradient as JSON")
    p.add_argument("hmm")
    p.add_argument("policy")
    p.add_argument("--mode", choices=["exact", "sampled"], default="sampled")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--out", required=True)
    _common(p, seed=True, horizon=True, threads=True, budget=True)
    p.set_defaults(func=cmd_gradient, primary="out")

    p = sub.add_parser("sample", help="export sampled trajectories as JSON lines")
    p.add_argument("hmm")
    p.add_argument("policy")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--out", required=True)
    _common(p, seed=True, horizon=True, threads=True)
    p.set_defaults(func=cmd_sample, primary="out")

    p = sub.add_parser("posterior", help="posterior and entropy for JSON-lines records")
    p.add_argument("hmm")
    p.add_argument("records")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_posterior, primary="out")

    p = sub.add_parser("search", help="best of N random policies")
    p.add_argument("hmm")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--memory", type=int, default=DEFAULT_MEMORY)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--mode", choices=["sampled", "exact"], default="sampled")
    p.add_argument("--out-policy", required=True)
    _common(p, seed=True, horizon=True, threads=True, budget=True)
    p.set_defaults(func=cmd_search, primary="out_policy")

    p = sub.add_parser("rerun", help="re-execute a run manifest and compare artifacts")
    p.add_argument("manifest")
    p.add_argument("--threads", type=int, default=None,
                   help="override the recorded worker count; outputs must not change")
    p.set_defaults(func=cmd_rerun, primary=None)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        code, _ = args.func(args)
        return code

    resolved = list(argv)
    if hasattr(args, "seed"):
        args.seed = _resolve_seed(args)
        if "--seed" not in argv:
            resolved += ["--seed", str(args.seed)]
    if args.manifest:
        manifest_path = args.manifest
    else:
        primary = getattr(args, args.primary, None) if args.primary else None
        manifest_path = (f"{primary}.manifest.json" if primary
                         else f"activepercept-{args.command}.manifest.json")
        resolved += ["--manifest", manifest_path]
    config = {k: v for k, v in vars(args).items() if k not in ("func", "primary")}
    manifest = Manifest(manifest_path, args.command, resolved, config,
                        getattr(args, "seed", None))
    try:
        code, artifacts = args.func(args)
    except BudgetExceeded as exc:
        print(f"refused: enumeration requires {exc.required} records "
              f"(budget {exc.budget})", file=sys.stderr)
        manifest.finalize("refused", required_records=exc.required)
        return EXIT_BUDGET
    except (ActivePerceptError, CompileError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        manifest.finalize("failed", error=str(exc))
        return EXIT_USAGE
    manifest.finalize("ok" if code == EXIT_OK else "failed", artifacts)
    return code


if __name__ == "__main__":
    sys.exit(main())
