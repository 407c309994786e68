#!/usr/bin/env python3
"""Regenerate data/synthetic_diabetes.csv (deterministic)."""

from pathlib import Path

from forestrules.datasets import synthetic_diabetes
from forestrules.model import save_dataset

out = Path(__file__).resolve().parent.parent / "data" / "synthetic_diabetes.csv"
out.parent.mkdir(exist_ok=True)
save_dataset(synthetic_diabetes(), out, label="class")
print(f"wrote {out}")
