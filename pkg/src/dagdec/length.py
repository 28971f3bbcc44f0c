"""Target-length prediction and length-constrained lattice decoding.

The decoder finds, for every candidate length l up to an upper bound, the
cheapest accepting path with exactly l arcs, using depth-first search with
per-(state, remaining-length) memoization and cumulative-probability arc
pruning. Candidates then compete on their cost scaled by an exponential
penalty for falling short of the target length.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from .result import STATUS_INFEASIBLE, STATUS_OK, DecodeResult
from .wfsa import EPSILON, Arc, Wfsa, shortest_path, topological_sort


@dataclass(frozen=True)
class LengthPredictor:
    """First-order model mapping input token length to target output length."""

    slope: float
    intercept: float


def fit_length_predictor(pairs: Sequence[tuple[float, float]]) -> LengthPredictor:
    """Ordinary least squares over (input length, output length) pairs."""
    if len(pairs) < 2:
        raise ValueError("need at least two pairs to fit a length predictor")
    xs = [float(x) for x, _ in pairs]
    ys = [float(y) for _, y in pairs]
    if max(xs) == min(xs):
        raise ValueError("degenerate regression: all input lengths are equal")
    fit = statistics.linear_regression(xs, ys)
    return LengthPredictor(slope=fit.slope, intercept=fit.intercept)


def predict_target_length(pred: LengthPredictor, x: int) -> int:
    """ceil(slope * x + intercept), clamped to at least one token."""
    if x < 0:
        raise ValueError("input length must be >= 0")
    return max(1, math.ceil(pred.slope * x + pred.intercept))


def save_length_predictor(pred: LengthPredictor, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{pred.slope!r}\n{pred.intercept!r}\n")


def load_length_predictor(path: str) -> LengthPredictor:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise ValueError("predictor file must have two lines: slope, intercept")
    return LengthPredictor(slope=float(lines[0]), intercept=float(lines[1]))


def default_upper_bound(target_length: int) -> int:
    return min(target_length + 5, math.floor(target_length * 1.5))


@dataclass(frozen=True)
class LcConfig:
    """Length-constraint parameters.

    `edge_prune_threshold` is the cumulative-probability mass of out-arcs
    explored per state; 1.0 disables pruning and makes the search exact.
    """

    target_length: int
    strictness: float = 1.0
    edge_prune_threshold: float = 0.7
    upper_bound: int | None = None

    def __post_init__(self) -> None:
        if self.target_length < 1:
            raise ValueError("target_length must be >= 1")
        if self.strictness < 0:
            raise ValueError("strictness must be >= 0")
        if not 0.0 < self.edge_prune_threshold <= 1.0:
            raise ValueError("edge_prune_threshold must be in (0, 1]")
        if self.upper_bound is None:
            object.__setattr__(self, "upper_bound", default_upper_bound(self.target_length))
        if self.upper_bound < 1:
            raise ValueError("upper_bound must be >= 1")


def length_penalty(l: int, target_length: int, strictness: float) -> float:
    """exp(A * (L_tgt / l - 1)) for strings shorter than target, else 1."""
    if l < 1:
        raise ValueError("length must be >= 1")
    if l >= target_length:
        return 1.0
    return math.exp(strictness * (target_length / l - 1.0))


class _LengthSearch:
    """Memoized DFS over (state, remaining length) with arc pruning."""

    def __init__(self, w: Wfsa, cfg: LcConfig) -> None:
        if any(arc.label == EPSILON for _, arc in w.all_arcs()):
            raise ValueError("epsilon arcs must be removed before length-constrained decoding")
        if any(src >= arc.dst for src, arc in w.all_arcs()):
            w = topological_sort(w)
        self.w = w
        self.cfg = cfg
        self.pruned = [self._prune_arcs(w.arcs_from(s)) for s in range(w.num_states)]
        self.delta: dict[tuple[int, int], float] = {}
        self.parent: dict[tuple[int, int], Arc] = {}

    def _prune_arcs(self, arcs: list[Arc]) -> list[Arc]:
        # Minimal cheapest-first prefix whose renormalized probability mass
        # exceeds the threshold; kept in full if the mass never does.
        if not arcs:
            return []
        ordered = sorted(arcs, key=lambda a: (a.weight, a.label, a.dst))
        if self.cfg.edge_prune_threshold >= 1.0:
            return ordered
        total = math.fsum(math.exp(-a.weight) for a in ordered)
        if total <= 0.0:
            return ordered
        kept = []
        mass = 0.0
        for arc in ordered:
            kept.append(arc)
            mass += math.exp(-arc.weight) / total
            if mass > self.cfg.edge_prune_threshold:
                break
        return kept

    def cost(self, state: int, length: int) -> float:
        """delta(state, length): cheapest path to a final state with exactly
        `length` arcs; memoized, computed with an explicit DFS stack."""
        inf = float("inf")
        if length == 0:
            return 0.0 if state in self.w.finals else inf
        if (state, length) in self.delta:
            return self.delta[(state, length)]
        stack = [(state, length)]
        while stack:
            u, l = stack[-1]
            if (u, l) in self.delta:
                stack.pop()
                continue
            missing = [
                (arc.dst, l - 1)
                for arc in self.pruned[u]
                if l - 1 > 0 and (arc.dst, l - 1) not in self.delta
            ]
            if missing:
                stack.extend(missing)
                continue
            best = inf
            best_arc = None
            for arc in self.pruned[u]:
                if l - 1 == 0:
                    tail = 0.0 if arc.dst in self.w.finals else inf
                else:
                    tail = self.delta[(arc.dst, l - 1)]
                c = arc.weight + tail
                if c < best:
                    best = c
                    best_arc = arc
            self.delta[(u, l)] = best
            if best_arc is not None:
                self.parent[(u, l)] = best_arc
            stack.pop()
        return self.delta[(state, length)]

    def backtrace(self, length: int) -> tuple[int, ...]:
        tokens = []
        state = self.w.start
        for l in range(length, 0, -1):
            arc = self.parent[(state, l)]
            tokens.append(arc.label)
            state = arc.dst
        return tuple(tokens)


def length_cost_table(w: Wfsa, cfg: LcConfig) -> dict[int, float]:
    """delta(start, l) for l = 1..upper_bound, finite entries only."""
    search = _LengthSearch(w, cfg)
    out = {}
    for l in range(1, cfg.upper_bound + 1):
        c = search.cost(search.w.start, l)
        if math.isfinite(c):
            out[l] = c
    return out


def dfs_viterbi(w: Wfsa, cfg: LcConfig) -> DecodeResult:
    """Best length-penalized hypothesis among all lengths up to the bound.

    Returns the candidate minimizing length_penalty(l) * delta(start, l),
    preferring longer candidates on exact ties; the result carries both the
    raw path cost and the penalty-adjusted cost. When no accepting path of
    any permitted length exists, reports infeasibility along with what the
    unconstrained cheapest path would have looked like.
    """
    search = _LengthSearch(w, cfg)
    best_l = None
    best_cost = math.inf
    best_adjusted = math.inf
    for l in range(1, cfg.upper_bound + 1):
        c = search.cost(search.w.start, l)
        if not math.isfinite(c):
            continue
        adjusted = length_penalty(l, cfg.target_length, cfg.strictness) * c
        if adjusted <= best_adjusted:
            best_adjusted = adjusted
            best_cost = c
            best_l = l
    if best_l is None:
        unconstrained = shortest_path(w)
        if unconstrained.status != STATUS_OK:
            note = "no accepting path of any length"
        else:
            note = (
                f"no accepting path with length <= {cfg.upper_bound}; unconstrained "
                f"shortest path has {len(unconstrained.tokens)} tokens at cost "
                f"{unconstrained.cost}"
            )
        return DecodeResult(status=STATUS_INFEASIBLE, note=note)
    return DecodeResult(
        status=STATUS_OK,
        tokens=search.backtrace(best_l),
        cost=best_cost,
        adjusted_cost=best_adjusted,
    )
