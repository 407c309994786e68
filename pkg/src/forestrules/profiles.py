"""Per-class profiles: maximum-weight satisfiable conjunct subsets.

Each rule group is flattened into weighted single-feature conjuncts and the
heaviest simultaneously-satisfiable subset is selected.  Because every
conjunct constrains exactly one feature, features never conflict with each
other and the problem decomposes: per numeric feature the optimum is found
by sweeping interval start points, per nominal feature by picking the
heaviest category.  The per-feature optima are provably the global optimum,
so no external solver is needed; ``max_sat`` still accepts a ``solver``
callable so one can be plugged in.

The chosen subset merges into a single rule per class; a numeric profile
over a pixel grid can be rendered as a portable pixmap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, InfeasibleSearchError
from .model import FeatureSpace
from .rules import Conjunct, merge_conjuncts
from .simplify import GroupedRuleSet, RuleGroup


@dataclass(frozen=True)
class WeightedConjunct:
    conjunct: Conjunct
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("conjunct weight must be >= 0")


@dataclass(frozen=True)
class MaxSatResult:
    chosen: tuple[int, ...]
    witness: np.ndarray
    weight: float


@dataclass(frozen=True)
class ClassProfile:
    class_index: int
    conjuncts: tuple[Conjunct, ...]
    satisfied_weight: float
    total_weight: float


Solver = Callable[[Sequence[WeightedConjunct], FeatureSpace], MaxSatResult]


def _best_numeric_point(items: list[tuple[int, Conjunct, float]]) -> tuple[float, float]:
    """Heaviest stabbing point for half-open intervals.

    Coverage only jumps up where an interval starts, so the optimum sits at
    some interval's lower bound (or anywhere left of every finite bound).
    Ties pick the smallest candidate.
    """
    candidates: list[float] = []
    if any(c.lo == -math.inf for _, c, _ in items):
        candidates.append(-math.inf)
    candidates.extend(sorted({c.lo for _, c, _ in items if c.lo != -math.inf}))
    best_v, best_w = None, -1.0
    for v in candidates:
        w = sum(wt for _, c, wt in items if c.lo <= v < c.hi or (v == -math.inf and c.lo == -math.inf))
        if w > best_w:
            best_v, best_w = v, w
    if best_v == -math.inf:
        finite = [b for _, c, _ in items for b in (c.lo, c.hi) if math.isfinite(b)]
        best_v = min(finite) - 1.0 if finite else 0.0
    return best_v, best_w


def _best_category(items: list[tuple[int, Conjunct, float]], decl) -> tuple[int, float]:
    per_cat: dict[int, float] = {}
    for _, c, wt in items:
        for cat in c.categories:
            per_cat[cat] = per_cat.get(cat, 0.0) + wt
    # ties pick the lexicographically first category name
    best = min(per_cat.items(), key=lambda kv: (-kv[1], decl.categories[kv[0]]))
    return best[0], best[1]


def _sweep_solver(conjuncts: Sequence[WeightedConjunct], space: FeatureSpace) -> MaxSatResult:
    n = space.n_features
    witness = np.zeros(n)
    per_feature: dict[int, list[tuple[int, Conjunct, float]]] = {}
    for i, wc in enumerate(conjuncts):
        per_feature.setdefault(wc.conjunct.feature, []).append((i, wc.conjunct, wc.weight))

    chosen: list[int] = []
    total = 0.0
    for f in sorted(per_feature):
        items = per_feature[f]
        if space.features[f].is_numeric:
            v, w = _best_numeric_point(items)
            witness[f] = v
        else:
            cat, w = _best_category(items, space.features[f])
            witness[f] = float(cat)
        total += w
        chosen.extend(i for i, c, _ in items if c.holds(witness[f]))
    return MaxSatResult(tuple(sorted(chosen)), witness, total)


def max_sat(
    conjuncts: Sequence[WeightedConjunct],
    space: FeatureSpace,
    solver: Solver | None = None,
) -> MaxSatResult:
    """Maximum-weight subset of single-feature conjuncts that one instance
    can satisfy simultaneously, with such a witness instance."""
    if not conjuncts:
        return MaxSatResult((), np.zeros(space.n_features), 0.0)
    return (solver or _sweep_solver)(conjuncts, space)


def profile_group(group: RuleGroup, space: FeatureSpace, solver: Solver | None = None) -> ClassProfile:
    """Collapse one group into a single merged rule for its signature class."""
    weighted = [
        WeightedConjunct(c, r.weight)
        for r in group.rules
        for c in r.conjuncts
    ]
    result = max_sat(weighted, space, solver)
    merged = merge_conjuncts(weighted[i].conjunct for i in result.chosen)
    return ClassProfile(
        class_index=int(np.argmax(group.signature)),
        conjuncts=tuple(merged),
        satisfied_weight=result.weight,
        total_weight=float(sum(wc.weight for wc in weighted)),
    )


def build_profile(expl: GroupedRuleSet, solver: Solver | None = None) -> list[ClassProfile]:
    """One profile per class, in class order.

    When several groups peak at the same class, the heaviest one is
    profiled.  A class with no group is an error: the upstream search is
    expected to enforce coverage.
    """
    m = expl.space.n_classes
    by_class: dict[int, RuleGroup] = {}
    for g in expl.groups:
        if not g.rules:
            continue
        c = int(np.argmax(g.signature))
        cur = by_class.get(c)
        if cur is None or g.total_weight > cur.total_weight:
            by_class[c] = g
    missing = [expl.space.classes[c] for c in range(m) if c not in by_class]
    if missing:
        raise InfeasibleSearchError(f"no rule group represents class(es): {', '.join(missing)}")
    return [profile_group(by_class[c], expl.space, solver) for c in range(m)]


# ---------------------------------------------------------------------------
# output formats

def profile_to_dicts(profiles: Sequence[ClassProfile], space: FeatureSpace) -> list[dict]:
    from .rules import conjunct_to_dict

    return [
        {
            "class": space.classes[p.class_index],
            "conjuncts": [conjunct_to_dict(c, space) for c in p.conjuncts],
            "satisfied_weight": p.satisfied_weight,
            "total_weight": p.total_weight,
        }
        for p in profiles
    ]


def format_profiles(profiles: Sequence[ClassProfile], space: FeatureSpace) -> str:
    """Side-by-side text table, one column per class."""
    cols = []
    for p in profiles:
        rows = [space.classes[p.class_index]] + [c.format(space) for c in p.conjuncts]
        cols.append(rows)
    width = [max(len(r) for r in col) for col in cols]
    height = max(len(col) for col in cols) if cols else 0
    lines = []
    for i in range(height):
        cells = []
        for col, w in zip(cols, width):
            cells.append((col[i] if i < len(col) else "").ljust(w))
        lines.append("  |  ".join(cells).rstrip())
    if len(lines) > 1:
        lines.insert(1, "-+-".join("-" * (w + 2) for w in width)[1:])
    return "\n".join(lines)


BACKGROUND_RGB = (173, 216, 230)  # unconstrained pixels render light blue


def render_profile_grid(
    profile: ClassProfile,
    width: int,
    height: int,
    space: FeatureSpace,
    feature_ranges: np.ndarray | None = None,
) -> bytes:
    """Render a numeric pixel-grid profile as a binary P6 pixmap.

    Every constrained pixel is painted with the median of its interval
    (infinite sides clamped to the feature's value range); everything else
    gets the background sentinel color.  ``feature_ranges`` is an (n, 2) array of
    per-feature (low, high); when omitted, the profile's own finite bounds
    define one shared range.
    """
    n = space.n_features
    if width * height != n:
        raise DataError(f"grid {width}x{height} does not cover {n} features")
    if any(not f.is_numeric for f in space.features):
        raise DataError("grid rendering needs an all-numeric feature space")

    if feature_ranges is None:
        finite = [b for c in profile.conjuncts for b in (c.lo, c.hi) if math.isfinite(b)]
        lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
        if lo == hi:
            hi = lo + 1.0
        feature_ranges = np.tile([lo, hi], (n, 1))
    feature_ranges = np.asarray(feature_ranges, dtype=np.float64)

    img = np.tile(np.array(BACKGROUND_RGB, dtype=np.uint8), (height * width, 1))
    for c in profile.conjuncts:
        rlo, rhi = feature_ranges[c.feature]
        lo = max(c.lo, rlo)
        hi = min(c.hi, rhi)
        median = (lo + hi) / 2.0
        frac = (median - rlo) / (rhi - rlo) if rhi > rlo else 0.0
        gray = int(round(255 * min(1.0, max(0.0, frac))))
        img[c.feature] = (gray, gray, gray)

    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + img.tobytes()
