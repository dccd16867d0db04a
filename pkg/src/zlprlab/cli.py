"""Command-line entry point: ``zlprlab {synth,gradcheck,riskcheck,train,eval,compare}``.

Exit codes: 0 success, 1 I/O, 2 usage, 3 check failure, 4 numerical failure.
Every command that writes files also writes ``manifest.json`` next to them.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .checks import gradient_check
from .data import RNG_NAME, SyntheticSpec, generate_synthetic, load_dataset, save_dataset, split
from .errors import NonConvergenceError, NumericalError, ParseError, UndefinedMetricError, UsageError
from .losses import KINDS, DecisionRule, LossSpec, resolve_kind
from .metrics import LOWER_IS_BETTER, METRIC_COLUMNS
from .regularization import score_to_probability
from .risk import (
    BUILTIN_JOINTS,
    bce_logodds_solution,
    builtin_joint,
    load_joint,
    minimize_expected_loss,
    minimize_soft_zlpr,
    product_joint,
)
from .trainer import TrainConfig, default_decision_rule, evaluate, load_model, save_model, train

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_CHECK, EXIT_NUMERIC = 0, 1, 2, 3, 4
SPLITS = ("train", "val", "test")
DATA_FILE = "data.jsonl"


def fixture_path(name):
    return resources.files("zlprlab") / "fixtures" / name


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, args, artifacts, started, extra=None):
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "flags": flags,
        "artifacts": {name: {"path": str(p), "sha256": _sha256(p)} for name, p in artifacts.items()},
        "rng": RNG_NAME,
        "duration_s": round(time.time() - started, 3),
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _loss_spec(args, kind=None):
    return LossSpec(
        kind or args.loss,
        gamma_fl=args.gamma_fl,
        gamma_dl1=args.gamma_dl1,
        gamma_dl2=args.gamma_dl2,
        alpha_rl=args.alpha_rl,
        alpha_warp=args.alpha_warp,
        s0=args.s0,
        sample_budget_t=args.sample_budget,
        rng_seed=args.loss_seed,
    )


def _resolve_coupling(args):
    if args.coupling_file:
        return load_joint(args.coupling_file)
    if args.coupling:
        if args.coupling in BUILTIN_JOINTS:
            return builtin_joint(args.coupling)
        path = fixture_path(f"{args.coupling}.joint")
        if not path.is_file():
            raise UsageError(f"unknown coupling {args.coupling!r}")
        return load_joint(path)
    return None


def resolve_dataset(path, split_seed):
    """A dataset file, a directory holding ``data.jsonl``, or ``<dir>/{train,val,test}``.

    The split form re-derives the 8:1:1 split with ``split_seed``.
    """
    p = Path(path)
    if p.is_file():
        return load_dataset(p)
    if p.is_dir():
        return load_dataset(p / DATA_FILE)
    if p.name in SPLITS and (p.parent / DATA_FILE).is_file():
        parts = split(load_dataset(p.parent / DATA_FILE), split_seed)
        return parts[SPLITS.index(p.name)]
    raise FileNotFoundError(f"no dataset at {path}")


def _metrics_row(report):
    return {key: getattr(report, key) for key, _ in METRIC_COLUMNS}


def cmd_synth(args):
    started = time.time()
    coupling = _resolve_coupling(args)
    if args.mode == "coupled" and coupling is None:
        raise UsageError("--mode coupled needs --coupling-file or --coupling")
    noise = args.noise if args.noise is not None else (1.0 if args.mode == "coupled" else 0.0)
    spec = SyntheticSpec(
        mode=args.mode,
        num_features=args.features,
        num_labels=args.labels,
        sample_count=args.samples,
        noise_std=noise,
        coupling=coupling if args.mode == "coupled" else None,
        clusters=args.clusters,
        name=args.name,
    )
    ds = generate_synthetic(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_path = save_dataset(ds, out / DATA_FILE)
    write_manifest(out, args, {"data": data_path}, started, {"seeds": {"data": args.seed}})
    print(f"wrote {len(ds)} examples (F={ds.num_features}, L={ds.num_labels}) to {data_path}")
    return EXIT_OK


def cmd_gradcheck(args):
    kinds = list(KINDS) if args.loss == "all" else [resolve_kind(k) for k in args.loss.split(",")]
    failed = []
    print(f"{'loss':<14}{'max rel err':>14}  status")
    for kind in kinds:
        spec = _loss_spec(args, kind)
        err = gradient_check(kind, trials=args.trials, seed=args.seed, spec=spec)
        ok = err <= args.tol
        if not ok:
            failed.append(kind)
        print(f"{kind:<14}{err:>14.3e}  {'ok' if ok else 'FAIL'}")
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}")
        return EXIT_CHECK
    return EXIT_OK


def _fmt(v):
    return np.array2string(np.asarray(v), precision=6, separator=", ")


def cmd_riskcheck(args):
    joint = load_joint(args.joint) if args.joint else builtin_joint(args.builtin)
    spec = _loss_spec(args)
    out = {"loss": spec.kind, "label_count": joint.label_count}
    try:
        rep = minimize_expected_loss(joint, spec, tol=args.tol)
    except NonConvergenceError as exc:
        print(f"no convergence: best iterate {_fmt(exc.best)}, max|grad| {exc.gradient_norm:.3e}")
        return EXIT_NUMERIC
    out.update(s_star=rep.s_star.tolist(), gradient_norm=rep.gradient_norm, iterations=rep.iterations)
    print(f"joint: L={joint.label_count}, loss: {spec.kind}")
    print(f"  s*            = {_fmt(rep.s_star)}")
    print(f"  max|grad|     = {rep.gradient_norm:.3e} after {rep.iterations} iterations")
    if rep.t1 is not None:
        out.update(t1=rep.t1.tolist(), t2=rep.t2.tolist(), identity_error=rep.identity_error())
        print(f"  T1 (log-odds) = {_fmt(rep.t1)}")
        print(f"  T2 (coupling) = {_fmt(rep.t2)}   max|T2| = {np.max(np.abs(rep.t2)):.6f}")
        print(f"  max|s* - (T1+T2)/2| = {rep.identity_error():.3e}")
        indep = minimize_expected_loss(product_joint(joint.marginals()), spec, tol=args.tol)
        shift = float(np.max(np.abs(indep.s_star - rep.s_star)))
        out.update(independent_s_star=indep.s_star.tolist(), dependence_shift=shift)
        print(f"  s* for independent labels, same marginals = {_fmt(indep.s_star)} (max shift {shift:.6f})")
    marg = joint.marginals()
    if np.all((marg > 0) & (marg < 1)):
        logodds = bce_logodds_solution(joint)
        out["bce_logodds"] = logodds.tolist()
        print(f"  per-label log-odds      = {_fmt(logodds)}")
        if spec.kind == "bce":
            gap = float(np.max(np.abs(rep.s_star - logodds)))
            out["bce_logodds_gap"] = gap
            print(f"  max|s* - log-odds|      = {gap:.3e}")
        s_soft, _ = minimize_soft_zlpr(marg, tol=args.tol)
        soft_err = float(np.max(np.abs(score_to_probability(s_soft) - marg)))
        out["soft_recovery_error"] = soft_err
        print(f"  soft-ZLPR on the marginals: max|sigmoid(2s*) - p| = {soft_err:.3e}")
    if args.json:
        Path(args.json).write_text(json.dumps(out, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _seeds(args):
    init = args.seed if args.init_seed is None else args.init_seed
    shuffle = args.seed if args.shuffle_seed is None else args.shuffle_seed
    split_seed = args.seed if args.split_seed is None else args.split_seed
    return init, shuffle, split_seed


def _train_config(args, spec, init_seed, shuffle_seed):
    return TrainConfig(
        loss=spec,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        init_seed=init_seed,
        shuffle_seed=shuffle_seed,
        decision_rule=DecisionRule.parse(args.rule) if args.rule else None,
        label_smoothing=args.label_smoothing,
    )


def cmd_train(args):
    started = time.time()
    init_seed, shuffle_seed, split_seed = _seeds(args)
    ds = resolve_dataset(args.data, split_seed)
    tr, va, te = split(ds, split_seed)
    config = _train_config(args, _loss_spec(args), init_seed, shuffle_seed)
    model, history = train(config, tr, va)
    rule = config.decision_rule or default_decision_rule(config.loss, tr)
    test_report = evaluate(model, te, rule)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provenance = {
        "config": config.to_dict(),
        "decision_rule": str(rule),
        "seeds": {"init": init_seed, "shuffle": shuffle_seed, "split": split_seed},
        "data": str(args.data),
    }
    model_path = save_model(model, out / "model.json", provenance)
    hist_path = out / "history.jsonl"
    rows = history.to_records()
    rows.append({"best_epoch": history.best_epoch, "selected_epoch": len(history.train_loss)})
    hist_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8")
    report_path = _write_report(out / "report.jsonl", test_report, "test", spec=config.loss.kind, rule=rule)
    write_manifest(
        out,
        args,
        {"model": model_path, "history": hist_path, "report": report_path},
        started,
        {"seeds": provenance["seeds"]},
    )
    _print_report(test_report, f"test metrics ({config.loss.kind}, rule {rule})")
    return EXIT_OK


def _write_report(path, report, split_name, spec, rule):
    row = {
        "split": split_name,
        "loss": spec,
        "decision_rule": str(rule),
        "metrics": _metrics_row(report),
        "skipped_avgprec": report.skipped_avgprec,
        "skipped_rankloss": report.skipped_rankloss,
    }
    Path(path).write_text(json.dumps(row, sort_keys=True) + "\n", encoding="utf-8")
    return Path(path)


def _print_report(report, title):
    print(title)
    for key, label in METRIC_COLUMNS:
        print(f"  {label:<9}{getattr(report, key):.4f}")


def cmd_eval(args):
    started = time.time()
    model_path = Path(args.model)
    if model_path.is_dir():
        model_path = model_path / "model.json"
    model, prov = load_model(model_path)
    split_seed = args.split_seed if args.split_seed is not None else prov.get("seeds", {}).get("split", 0)
    ds = resolve_dataset(args.data, split_seed)
    rule = DecisionRule.parse(args.rule or prov.get("decision_rule", "zero_threshold"))
    report = evaluate(model, ds, rule)
    loss = prov.get("config", {}).get("loss", {}).get("kind", "unknown")
    name = Path(args.data).name
    split_name = name if name in SPLITS else "all"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rp = _write_report(out / "report.jsonl", report, split_name, loss, rule)
        write_manifest(out, args, {"report": rp}, started, {"seeds": {"split": split_seed}})
    _print_report(report, f"metrics on {args.data} (rule {rule})")
    return EXIT_OK


def _winners(means):
    marks = {}
    for key, _ in METRIC_COLUMNS:
        vals = {k: m[key] for k, m in means.items() if m is not None}
        if not vals:
            continue
        best = min(vals.values()) if key in LOWER_IS_BETTER else max(vals.values())
        marks[key] = sorted(k for k, v in vals.items() if v == best)
    return marks


def cmd_compare(args):
    started = time.time()
    kinds = [resolve_kind(k) for k in args.losses.split(",") if k.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not kinds or not seeds:
        raise UsageError("--losses and --seeds must be non-empty")
    cells = {}
    for kind in kinds:
        for seed in seeds:
            try:
                ds = resolve_dataset(args.data, seed)
                tr, va, te = split(ds, seed)
                config = _train_config(args, _loss_spec(args, kind), seed, seed)
                model, _ = train(config, tr, va)
                rule = config.decision_rule or default_decision_rule(config.loss, tr)
                cells[kind, seed] = _metrics_row(evaluate(model, te, rule))
            except (NumericalError, UndefinedMetricError) as exc:
                cells[kind, seed] = {"error": str(exc)}
    means = {}
    for kind in kinds:
        good = [cells[kind, s] for s in seeds if "error" not in cells[kind, s]]
        means[kind] = {key: float(np.mean([c[key] for c in good])) for key, _ in METRIC_COLUMNS} if good else None
    marks = _winners(means)
    header = f"{'loss':<14}" + "".join(f"{label:>11}" for _, label in METRIC_COLUMNS)
    lines = [header]
    for kind in kinds:
        row = f"{kind:<14}"
        for key, _ in METRIC_COLUMNS:
            if means[kind] is None:
                row += f"{'failed':>11}"
            else:
                star = "*" if kind in marks.get(key, []) else " "
                row += f"{means[kind][key]:>10.4f}{star}"
        lines.append(row)
    lines.append(f"mean over seeds {','.join(map(str, seeds))}; * marks the best per metric (lowest RankLoss)")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        txt = out / "compare.txt"
        txt.write_text(table, encoding="utf-8")
        jl = out / "compare.jsonl"
        rows = []
        for kind in kinds:
            rows.append(
                {
                    "loss": kind,
                    "mean": means[kind],
                    "winner": sorted(k for k, v in marks.items() if kind in v),
                    "per_seed": {str(s): cells[kind, s] for s in seeds},
                }
            )
        jl.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8")
        write_manifest(out, args, {"table": txt, "rows": jl}, started, {"seeds": seeds})
    return EXIT_OK


def _add_loss_flags(p, default="zlpr"):
    if default is not None:
        p.add_argument("--loss", default=default, help="loss kind (or alias: fl, dl1, dl2, rl, bp-mll)")
    p.add_argument("--gamma-fl", type=float, default=2.0)
    p.add_argument("--gamma-dl1", type=float, default=1.0)
    p.add_argument("--gamma-dl2", type=float, default=1.0)
    p.add_argument("--alpha-rl", type=float, default=1.0)
    p.add_argument("--alpha-warp", type=float, default=1.0)
    p.add_argument("--s0", type=float, default=0.0, help="TLPR threshold")
    p.add_argument("--sample-budget", type=int, default=100, help="pairs kept by lsep_sampled")
    p.add_argument("--loss-seed", type=int, default=0, help="seed for lsep_sampled pair draws")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--rule", default=None, help="zero | threshold:<tau> | top_k:<k>")
    p.add_argument("--label-smoothing", type=float, default=0.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="zlprlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"zlprlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--mode", choices=("independent", "coupled"), default="independent")
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--labels", type=int, default=8)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--noise", type=float, default=None, help="default 0 (independent) or 1 (coupled)")
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--coupling-file", default=None)
    p.add_argument("--coupling", default=None, help="built-in joint or shipped fixture name, e.g. coupled_L8")
    p.add_argument("--name", default="synthetic")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--loss", default="all", help="kind, comma list, or 'all'")
    _add_loss_flags(p, default=None)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    # small budget so sampling is actually exercised; nonzero threshold for tlpr
    p.set_defaults(func=cmd_gradcheck, sample_budget=3, s0=0.5)

    p = sub.add_parser("riskcheck", help="exact expected-risk minimisation on a joint")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--joint", default=None, help="joint distribution file")
    g.add_argument("--builtin", default="coupled_2", choices=sorted(BUILTIN_JOINTS))
    _add_loss_flags(p)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json", default=None, help="also write the results here")
    p.set_defaults(func=cmd_riskcheck)

    p = sub.add_parser("train", help="train a linear model")
    p.add_argument("--data", required=True)
    _add_loss_flags(p)
    _add_train_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=None)
    p.add_argument("--shuffle-seed", type=int, default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--rule", default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="train several losses over several seeds")
    p.add_argument("--losses", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="1,2,3")
    _add_loss_flags(p, default=None)
    _add_train_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, NonConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ParseError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
