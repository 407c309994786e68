"""Command-line interface.

One subcommand per pipeline stage: ``train``, ``extract``, ``evaluate``,
``optexplain``, ``proexplain``, ``profile``, ``predict``, ``render``.
Every run writes deterministic JSON artifacts into ``--out`` (re-running
with the same ``--seed`` reproduces them byte for byte) plus a
``run_meta.json`` holding the timestamp and environment, which is the one
file excluded from that guarantee.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    ContradictionError,
    DataError,
    FitnessEvaluationError,
    ForestRulesError,
    InfeasibleSearchError,
    ModelFormatError,
    ModelValidationError,
)
from .evaluate import ExplanationMetrics, evaluate_explanation, explain_instance, scale as expl_scale
from .model import load_dataset, load_model, save_model
from .optimize import PsoConfig, default_opt_bounds, default_pro_bounds, opt_explain, pro_explain_params
from .profiles import build_profile, format_profiles, profile_to_dicts, render_profile_grid
from .rules import extract_rules, load_rules_jsonl, ruleset_votes, save_rules_jsonl
from .simplify import (
    ExplanationParams,
    Simplifier,
    format_groups,
    load_explanation,
    save_explanation,
)
from .trainer import TrainConfig, train_forest

EXIT_CODES = {
    ModelFormatError: 3,
    ModelValidationError: 4,
    DataError: 5,
    InfeasibleSearchError: 6,
    ContradictionError: 7,
    FitnessEvaluationError: 8,
}


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, args, started: float) -> None:
    _write_json(
        out / "run_meta.json",
        {
            "argv": sys.argv[1:],
            "started_unix": started,
            "duration_s": time.time() - started,
            "kernel_backend": kernels.BACKEND,
        },
    )


def _pso_from_args(args, bounds, seed) -> PsoConfig:
    if args.bounds:
        try:
            pairs = [pair.split(":") for pair in args.bounds.split(",")]
            bounds = tuple((float(lo), float(hi)) for lo, hi in pairs)
        except ValueError as exc:
            raise DataError(f"--bounds must look like 'lo:hi,lo:hi,lo:hi,lo:hi': {exc}") from exc
        if len(bounds) != 4:
            raise DataError("--bounds needs exactly four lo:hi pairs")
    return PsoConfig(
        bounds=bounds,
        n_particles=args.swarm,
        n_iterations=args.iters,
        seed=seed,
        integer_dims=(3,),
    )


def _write_trace(path: Path, trace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for point in trace:
            fh.write(
                json.dumps(
                    {
                        "iteration": point.iteration,
                        "params": list(point.params),
                        "score": None if point.score == -np.inf else point.score,
                    }
                )
                + "\n"
            )


def _manual_params(args) -> ExplanationParams | None:
    given = [args.phi, args.theta, args.psi, args.cap]
    if all(v is None for v in given):
        return None
    if any(v is None for v in given):
        raise DataError("manual simplification needs all of --phi, --theta, --psi, --cap")
    return ExplanationParams(args.phi, args.theta, args.psi, args.cap)


# ---------------------------------------------------------------------------
# subcommands

def cmd_train(args) -> int:
    started = time.time()
    out = _out_dir(args)
    data = _load_train(args)
    config = TrainConfig(
        n_trees=args.trees,
        max_depth=args.max_depth,
        features_per_split=args.features_per_split,
        min_samples_leaf=args.min_leaf,
        seed=args.seed,
    )
    model = train_forest(data, config)
    save_model(model, out / "model.json")
    _write_meta(out, args, started)
    print(f"wrote {out / 'model.json'} ({len(model.trees)} trees)")
    return 0


def cmd_extract(args) -> int:
    started = time.time()
    out = _out_dir(args)
    model = load_model(args.model)
    rules = extract_rules(model)
    save_rules_jsonl(rules, out / "rules.jsonl")
    _write_json(out / "extract_report.json", {"n_rules": len(rules), "scale": rules.n_atoms})
    _write_meta(out, args, started)
    print(f"wrote {out / 'rules.jsonl'}: {len(rules)} rules, {rules.n_atoms} conjuncts")
    return 0


def cmd_evaluate(args) -> int:
    started = time.time()
    out = _out_dir(args)
    model = load_model(args.model)
    data = load_dataset(args.test, model.space, label=args.label)
    manual = _manual_params(args)

    if args.explanation:
        expl = load_explanation(args.explanation)
        metrics = evaluate_explanation(expl, model, data)
    elif manual is not None:
        rules = extract_rules(model)
        s = Simplifier(rules, model)
        expl = s.grouped(s.run(manual))
        save_explanation(expl, out / "explanation.json")
        metrics = evaluate_explanation(expl, model, data)
    else:
        # raw extracted rule set: must agree with the model everywhere
        rules = (
            load_rules_jsonl(args.rules, model.space)
            if args.rules
            else extract_rules(model)
        )
        votes, nsat = ruleset_votes(rules, data.X)
        classes = np.argmax(votes, axis=1)
        truth = kernels.forest_classes(kernels.pack_forest(model), data.X)
        accuracy = float(np.mean(classes == data.labels)) if data.labels is not None else None
        metrics = ExplanationMetrics(
            fidelity=float(np.mean(classes == truth)),
            scale=rules.n_atoms,
            n_rows=data.n_rows,
            no_rule_rate=float(np.mean(nsat == 0)),
            accuracy=accuracy,
        )

    doc = metrics.to_dict()
    if args.verbose and args.explanation:
        expl = load_explanation(args.explanation)
        truth = kernels.forest_classes(kernels.pack_forest(model), data.X)
        from .evaluate import predict_explanation_batch

        _, classes, _ = predict_explanation_batch(expl, data.X)
        m = model.space.n_classes
        confusion = np.zeros((m, m), dtype=int)
        np.add.at(confusion, (truth, classes), 1)
        doc["confusion_model_vs_explanation"] = confusion.tolist()
    _write_json(out / "evaluation.json", doc)
    _write_meta(out, args, started)
    print(json.dumps(doc))
    return 0


def _summary_rows(model, data, report) -> dict:
    raw_accuracy = None
    if data.labels is not None:
        truth = kernels.forest_classes(kernels.pack_forest(model), data.X)
        raw_accuracy = float(np.mean(truth == data.labels))
    p = report.params
    return {
        "params": p.to_dict(),
        "raw": {"scale": report.extras.get("raw_scale"), "accuracy": raw_accuracy},
        "explanation": report.metrics.to_dict(),
        "score": report.score,
    }


def _format_summary(doc: dict) -> str:
    p = doc["params"]
    quad = (
        f"({p['node_threshold']:.3g}, {p['rule_threshold']:.3g}, "
        f"{p['merge_granularity']:.3g}, {p['group_cap']})"
    )
    raw = doc["raw"]
    ex = doc["explanation"]
    fmt = lambda v: "-" if v is None else (f"{v:.2f}" if isinstance(v, float) else str(v))
    lines = [
        f"{'(phi, theta, psi, k)':<34}{'scale':>8}{'accuracy':>10}{'fidelity':>10}",
        f"{'full rule set':<34}{fmt(raw['scale']):>8}{fmt(raw['accuracy']):>10}{'-':>10}",
        f"{quad:<34}{fmt(ex['scale']):>8}{fmt(ex.get('accuracy')):>10}{fmt(ex['fidelity']):>10}",
    ]
    return "\n".join(lines)


def cmd_optexplain(args) -> int:
    started = time.time()
    out = _out_dir(args)
    model = load_model(args.model)
    data = load_dataset(args.test, model.space, label=args.label)
    rules = extract_rules(model)
    pso = _pso_from_args(args, default_opt_bounds(model.space.n_classes), args.seed)
    expl, report = opt_explain(model, data, alpha=args.alpha, pso=pso, rules=rules)
    report.extras["raw_scale"] = rules.n_atoms

    save_explanation(expl, out / "explanation.json")
    summary = _summary_rows(model, data, report)
    _write_json(out / "summary.json", summary)
    _write_text(out / "summary.txt", _format_summary(summary) + "\n\n" + format_groups(expl))
    _write_trace(out / "trace.jsonl", report.trace)
    _write_meta(out, args, started)
    print(_format_summary(summary))
    return 0


def cmd_proexplain(args) -> int:
    started = time.time()
    out = _out_dir(args)
    model = load_model(args.model)
    data = load_dataset(args.test, model.space, label=args.label) if args.test else None
    rules = extract_rules(model)
    pso = _pso_from_args(args, default_pro_bounds(model.space.n_classes), args.seed)
    expl, report = pro_explain_params(model, data, pso=pso, rules=rules)

    save_explanation(expl, out / "explanation.json")
    _write_json(
        out / "summary.json",
        {
            "params": report.params.to_dict(),
            "score": report.score,
            "n_groups": len(expl.groups),
            "n_rules": expl.n_rules,
            "scale": expl_scale(expl),
        },
    )
    _write_trace(out / "trace.jsonl", report.trace)
    _write_meta(out, args, started)
    print(f"groups={len(expl.groups)} rules={expl.n_rules} scale={expl_scale(expl)}")
    return 0


def cmd_profile(args) -> int:
    started = time.time()
    out = _out_dir(args)
    expl = load_explanation(args.explanation)
    profiles = build_profile(expl)
    _write_json(out / "profile.json", profile_to_dicts(profiles, expl.space))
    text = format_profiles(profiles, expl.space)
    _write_text(out / "profile.txt", text)
    _write_meta(out, args, started)
    print(text)
    return 0


def cmd_predict(args) -> int:
    started = time.time()
    out = _out_dir(args)
    expl = load_explanation(args.explanation)
    data = load_dataset(args.test, expl.space, label=args.label)
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for i in range(data.n_rows):
            trace = explain_instance(expl, data.X[i])
            satisfied = [
                {
                    "group": gi,
                    "rule": ri,
                    "weight": expl.groups[gi].rules[ri].weight,
                    "conjuncts": [c.format(expl.space) for c in expl.groups[gi].rules[ri].conjuncts],
                }
                for gi, ri in trace.satisfied
            ]
            fh.write(
                json.dumps(
                    {
                        "row": i,
                        "class": expl.space.classes[trace.class_index],
                        "class_index": trace.class_index,
                        "scores": list(trace.scores),
                        "no_rule": trace.no_rule,
                        "satisfied": satisfied,
                    }
                )
                + "\n"
            )
    _write_meta(out, args, started)
    print(f"wrote {out / 'predictions.jsonl'} ({data.n_rows} rows)")
    return 0


def cmd_render(args) -> int:
    started = time.time()
    out = _out_dir(args)
    expl = load_explanation(args.explanation) if args.explanation else None
    if expl is not None:
        profiles = build_profile(expl)
        space = expl.space
    else:
        raise DataError("render needs --explanation (a grouped explanation file)")

    n = space.n_features
    width, height = args.width, args.height
    if width is None or height is None:
        side = int(round(n ** 0.5))
        if side * side != n:
            raise DataError(f"{n} features is not a square grid; pass --width and --height")
        width = height = side

    feature_ranges = None
    if args.test:
        data = load_dataset(args.test, space, label=args.label)
        feature_ranges = np.column_stack([data.X.min(axis=0), data.X.max(axis=0)])

    for p in profiles:
        buf = render_profile_grid(p, width, height, space, feature_ranges)
        name = space.classes[p.class_index].replace("/", "_")
        with open(out / f"profile_{name}.ppm", "wb") as fh:
            fh.write(buf)
    _write_meta(out, args, started)
    print(f"wrote {len(profiles)} pixmaps to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

def _load_train(args):
    from .model import FeatureDecl, FeatureSpace
    import csv as _csv

    with open(args.train, "r", encoding="utf-8", newline="") as fh:
        header = next(_csv.reader(fh))
    if args.label not in header:
        raise DataError(f"label column {args.label!r} not in {args.train}")
    feature_names = [h for h in header if h != args.label]

    # infer class names and nominal columns from the file itself
    classes: list[str] = []
    tokens: dict[str, set[str]] = {name: set() for name in feature_names}
    numeric: dict[str, bool] = {name: True for name in feature_names}
    with open(args.train, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        for rec in reader:
            lab = rec[args.label]
            if lab not in classes:
                classes.append(lab)
            for name in feature_names:
                tok = rec[name]
                if numeric[name]:
                    try:
                        float(tok)
                    except ValueError:
                        numeric[name] = False
                tokens[name].add(tok)
    feats = []
    for name in feature_names:
        if numeric[name]:
            feats.append(FeatureDecl(name))
        else:
            feats.append(FeatureDecl(name, "nominal", tuple(sorted(tokens[name]))))
    space = FeatureSpace(tuple(feats), tuple(sorted(classes)))
    return load_dataset(args.train, space, label=args.label)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestrules",
        description="Extract, simplify, optimize, and profile rule explanations of tree-ensemble classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False, test=None, out=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        if test is not None:
            p.add_argument("--test", required=(test == "required"), help="dataset CSV")
            p.add_argument("--label", help="label column name")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("train", help="train a bagged forest on a labeled CSV")
    p.add_argument("--train", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--features-per-split", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="convert every tree branch into a rule")
    common(p, model=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("evaluate", help="fidelity/scale of rules or an explanation")
    common(p, model=True, test="required")
    p.add_argument("--explanation", help="grouped explanation JSON")
    p.add_argument("--rules", help="cached rules.jsonl")
    p.add_argument("--phi", type=float, default=None, help="node filter cutoff (information gain, bits)")
    p.add_argument("--theta", type=float, default=None, help="rule filter cutoff in [0,1]")
    p.add_argument("--psi", type=float, default=None, help="signature granularity in (0,1]")
    p.add_argument("--cap", type=int, default=None, help="max rules kept per group")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optexplain", help="search parameters for the best fidelity/size balance")
    common(p, model=True, test="required")
    p.add_argument("--alpha", type=float, default=0.9, help="fidelity weight in [0,1]")
    p.add_argument("--swarm", type=int, default=20)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--bounds", help="search box override: 'lo:hi,lo:hi,lo:hi,lo:hi'")
    p.set_defaults(func=cmd_optexplain)

    p = sub.add_parser("proexplain", help="search parameters for profile-ready rule pools")
    common(p, model=True, test="optional")
    p.add_argument("--swarm", type=int, default=20)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--bounds", help="search box override: 'lo:hi,lo:hi,lo:hi,lo:hi'")
    p.set_defaults(func=cmd_proexplain)

    p = sub.add_parser("profile", help="collapse each class into one merged rule")
    p.add_argument("--explanation", required=True)
    common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("predict", help="classify rows and list the rules that fired")
    p.add_argument("--explanation", required=True)
    common(p, test="required")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("render", help="render numeric grid profiles as PPM images")
    p.add_argument("--explanation", required=True)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    common(p, test="optional")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ForestRulesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for etype, code in EXIT_CODES.items():
            if isinstance(exc, etype):
                return code
        return 1
    except ValueError as exc:  # bad configuration values (thresholds, counts)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
