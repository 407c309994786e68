"""The ``export`` command.

    export --input forest.pkl --features "a,b,c" --out model.json \
           [--classes "neg,pos"] [--train train.csv --label class] \
           [--raw-counts] [--no-oob] [--verify test.csv]

``--train`` supplies the fitting data so per-tree out-of-bag accuracy can
be recomputed from the bootstrap indices.  ``--verify`` re-predicts the
given rows through the exported file and fails unless every class matches
the source model's prediction.
"""

from __future__ import annotations

import argparse
import csv
import pickle
import sys

import numpy as np

from .exporter import ExportError, ExportOptions, export_model
from .schema_predict import load_schema, predict_classes


def _read_csv(path, feature_names, label=None):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        X, y = [], []
        for rec in reader:
            X.append([float(rec[name]) for name in feature_names])
            if label is not None:
                y.append(rec[label])
    return np.asarray(X), (y if label is not None else None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export",
        description="Export a pickled scikit-learn random forest to the portable JSON schema.",
    )
    parser.add_argument("--input", required=True, help="pickled fitted forest")
    parser.add_argument("--features", required=True, help="comma-separated feature names (csv header order)")
    parser.add_argument("--out", required=True, help="output model JSON path")
    parser.add_argument("--classes", help="comma-separated class names (defaults to the model's)")
    parser.add_argument("--train", help="training CSV, enables out-of-bag accuracy")
    parser.add_argument("--label", default="class", help="label column in --train/--verify")
    parser.add_argument("--no-oob", action="store_true", help="skip per-tree out-of-bag accuracy")
    parser.add_argument("--raw-counts", action="store_true",
                        help="keep raw leaf sample counts instead of parity-preserving normalized votes")
    parser.add_argument("--verify", help="CSV of rows; fail unless the export predicts like the source")
    args = parser.parse_args(argv)

    with open(args.input, "rb") as fh:
        model = pickle.load(fh)

    feature_names = [n.strip() for n in args.features.split(",") if n.strip()]
    class_names = [n.strip() for n in args.classes.split(",")] if args.classes else None

    train_X = train_y = None
    if args.train:
        train_X, labels = _read_csv(args.train, feature_names, args.label)
        # labels may be written as the model's own classes or as --classes names
        lookup = {str(c): i for i, c in enumerate(model.classes_)}
        if class_names:
            lookup.update({name: i for i, name in enumerate(class_names)})
        try:
            train_y = np.asarray([lookup[v] for v in labels])
        except KeyError as exc:
            print(f"error: label {exc} not among model classes or --classes", file=sys.stderr)
            return 2

    try:
        doc = export_model(
            ExportOptions(
                model=model,
                feature_names=feature_names,
                class_names=class_names,
                compute_oob=not args.no_oob,
                train_X=train_X,
                train_y=train_y,
                vote_mode="raw" if args.raw_counts else "normalized",
                output_path=args.out,
            )
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(doc['trees'])} trees)")

    if args.verify:
        X, _ = _read_csv(args.verify, feature_names)
        ours = predict_classes(load_schema(args.out), X)
        theirs = np.asarray(
            [list(model.classes_).index(c) for c in model.predict(X)]
        )
        agree = float(np.mean(ours == theirs))
        print(f"verification: {agree:.4f} agreement on {len(X)} rows")
        if agree < 1.0:
            mism = np.flatnonzero(ours != theirs)[:10].tolist()
            print(f"error: prediction mismatch at rows {mism}", file=sys.stderr)
            return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
