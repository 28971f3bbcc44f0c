"""Directed acyclic token lattices: model, serialization, pruning.

A lattice has one emission distribution and one forward transition
distribution per vertex, both stored sparsely as (index, log-probability)
pairs sorted by descending probability. Vertex 0 is the start, vertex L-1
the unique final. Pruning keeps the top-k entries per vertex and force-emits
constraint-phrase continuation tokens so constrained paths survive.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .constraints import ConstraintPhrase

DAG_FORMAT_VERSION = 1


class DagFormatError(ValueError):
    """Raised when a lattice document violates the format or invariants."""


@dataclass(frozen=True)
class Dag:
    """Immutable token lattice.

    emissions[u]  : tuple of (token_id, logprob <= 0), descending probability
    transitions[u]: tuple of (target > u, logprob <= 0), descending probability
    """

    num_vertices: int
    emissions: tuple[tuple[tuple[int, float], ...], ...]
    transitions: tuple[tuple[tuple[int, float], ...], ...]

    @property
    def start_vertex(self) -> int:
        return 0

    @property
    def final_vertex(self) -> int:
        return self.num_vertices - 1

    def emission_tokens(self, u: int) -> set[int]:
        return {t for t, _ in self.emissions[u]}

    def emission_logprob(self, u: int, token: int) -> float:
        """Log-probability of `token` at vertex u; -inf if not emittable."""
        for t, lp in self.emissions[u]:
            if t == token:
                return lp
        return -math.inf

    def transition_logprob(self, u: int, v: int) -> float:
        for t, lp in self.transitions[u]:
            if t == v:
                return lp
        return -math.inf


@dataclass(frozen=True)
class PruneConfig:
    """Per-vertex pruning degrees plus the phrases to keep emittable."""

    k_e: int
    k_t: int
    constraints: tuple["ConstraintPhrase", ...] = ()

    def __post_init__(self) -> None:
        if self.k_e < 1:
            raise ValueError("k_e must be >= 1")
        if self.k_t < 1:
            raise ValueError("k_t must be >= 1")
        object.__setattr__(self, "constraints", tuple(self.constraints))


def _sort_sparse(pairs: Iterable[tuple[int, float]]) -> tuple[tuple[int, float], ...]:
    # Descending probability; ties broken by smaller index for determinism.
    return tuple(sorted(pairs, key=lambda p: (-p[1], p[0])))


def load_dag(source: str | bytes) -> Dag:
    """Parse the versioned JSON lattice format, validating all invariants."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise DagFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DagFormatError("top-level document must be an object")
    if doc.get("version") != DAG_FORMAT_VERSION:
        raise DagFormatError(f"unsupported version {doc.get('version')!r}")
    num_vertices = doc.get("num_vertices")
    if not isinstance(num_vertices, int) or num_vertices < 1:
        raise DagFormatError("num_vertices must be a positive integer")
    vertices = doc.get("vertices")
    if not isinstance(vertices, list) or len(vertices) != num_vertices:
        raise DagFormatError("vertices list does not match num_vertices")

    emissions = []
    transitions = []
    final = num_vertices - 1
    for u, vertex in enumerate(vertices):
        if not isinstance(vertex, dict):
            raise DagFormatError(f"vertex {u}: not an object")
        em = []
        seen_tokens: set[int] = set()
        for pair in vertex.get("emissions", []):
            token, logp = _parse_pair(u, pair, "emission")
            if token < 0:
                raise DagFormatError(f"vertex {u}: negative token id {token}")
            if token in seen_tokens:
                raise DagFormatError(f"vertex {u}: duplicate emission token {token}")
            seen_tokens.add(token)
            em.append((token, logp))
        tr = []
        seen_targets: set[int] = set()
        for pair in vertex.get("transitions", []):
            target, logp = _parse_pair(u, pair, "transition")
            if target <= u:
                raise DagFormatError(f"vertex {u}: backward edge {u}->{target}")
            if target >= num_vertices:
                raise DagFormatError(
                    f"vertex {u}: dangling vertex index {target} (num_vertices={num_vertices})"
                )
            if target in seen_targets:
                raise DagFormatError(f"vertex {u}: duplicate transition target {target}")
            seen_targets.add(target)
            tr.append((target, logp))
        if u == final and tr:
            raise DagFormatError(f"vertex {u}: final vertex has outgoing transitions")
        emissions.append(_sort_sparse(em))
        transitions.append(_sort_sparse(tr))
    return Dag(
        num_vertices=num_vertices,
        emissions=tuple(emissions),
        transitions=tuple(transitions),
    )


def _parse_pair(u: int, pair: object, kind: str) -> tuple[int, float]:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise DagFormatError(f"vertex {u}: {kind} entry must be a [index, logprob] pair")
    idx, logp = pair
    if not isinstance(idx, int) or isinstance(idx, bool):
        raise DagFormatError(f"vertex {u}: {kind} index must be an integer")
    logp = float(logp)
    if logp > 0.0:
        raise DagFormatError(f"vertex {u}: {kind} probability > 0 in log space ({logp})")
    if math.isnan(logp):
        raise DagFormatError(f"vertex {u}: {kind} log-probability is NaN")
    return idx, logp


def dump_dag(dag: Dag) -> str:
    """Serialize to the canonical JSON form (round-trips bit-exactly)."""
    doc = {
        "version": DAG_FORMAT_VERSION,
        "num_vertices": dag.num_vertices,
        "vertices": [
            {
                "emissions": [[t, lp] for t, lp in dag.emissions[u]],
                "transitions": [[v, lp] for v, lp in dag.transitions[u]],
            }
            for u in range(dag.num_vertices)
        ],
    }
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def read_dag(path: str) -> Dag:
    with open(path, encoding="utf-8") as fh:
        return load_dag(fh.read())


def write_dag(dag: Dag, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_dag(dag))
        fh.write("\n")


def validate_normalized(dag: Dag, tol: float = 1e-6) -> None:
    """Check the unpruned-lattice invariant: per-vertex sums are 1 +- tol."""
    for u in range(dag.num_vertices):
        esum = math.fsum(math.exp(lp) for _, lp in dag.emissions[u])
        if abs(esum - 1.0) > tol:
            raise DagFormatError(f"vertex {u}: emission probabilities sum to {esum}")
        if u != dag.final_vertex:
            tsum = math.fsum(math.exp(lp) for _, lp in dag.transitions[u])
            if abs(tsum - 1.0) > tol:
                raise DagFormatError(f"vertex {u}: transition probabilities sum to {tsum}")


def force_emit(
    u: int,
    constraints: Sequence["ConstraintPhrase"],
    kept_emissions: Sequence[set[int]],
    predecessors: Sequence[set[int]],
) -> set[int]:
    """Continuation tokens that must stay emittable at vertex u.

    For every constraint phrase, every non-final phrase token found in the
    kept emissions of a pruned predecessor of u forces the following phrase
    token at u. Predecessor sets are taken over the top-k_t transition
    structure, so they must be final for all vertices below u.
    """
    forced: set[int] = set()
    preds = predecessors[u]
    if not preds or not constraints:
        return forced
    for phrase in constraints:
        toks = phrase.tokens
        for j in range(len(toks) - 1):
            tj = toks[j]
            if any(tj in kept_emissions[v] for v in preds):
                forced.add(toks[j + 1])
    return forced


def prune_dag(dag: Dag, cfg: PruneConfig) -> Dag:
    """Keep the top-k_e emissions and top-k_t transitions per vertex.

    Emission sets are augmented with forced constraint continuations;
    log-probabilities are kept raw (no renormalization). A forced token
    absent from a vertex's emission table has probability zero there and
    cannot be added.
    """
    kept_em: list[tuple[tuple[int, float], ...]] = []
    kept_em_sets: list[set[int]] = []
    kept_tr: list[tuple[tuple[int, float], ...]] = []
    predecessors: list[set[int]] = [set() for _ in range(dag.num_vertices)]

    for u in range(dag.num_vertices):
        em_sorted = _sort_sparse(dag.emissions[u])
        kept = dict(em_sorted[: cfg.k_e])
        forced = force_emit(u, cfg.constraints, kept_em_sets, predecessors)
        if forced:
            table = dict(em_sorted)
            for t in forced:
                if t in table:
                    kept[t] = table[t]
        kept_em.append(_sort_sparse(kept.items()))
        kept_em_sets.append(set(kept))

        tr_sorted = _sort_sparse(dag.transitions[u])[: cfg.k_t]
        kept_tr.append(tr_sorted)
        for v, _ in tr_sorted:
            predecessors[v].add(u)

    return Dag(
        num_vertices=dag.num_vertices,
        emissions=tuple(kept_em),
        transitions=tuple(kept_tr),
    )


def generate_synthetic_dag(
    seed: int,
    num_vertices: int,
    emission_degree: int,
    transition_degree: int,
    concentration: float,
    vocab_size: int = 32,
) -> Dag:
    """Deterministic random lattice with Dirichlet-distributed probabilities.

    `concentration` is the symmetric Dirichlet parameter: small values give
    peaked distributions (few entries above 0.2 per vertex, mimicking the
    sparsity of trained lattice generators), large values give flat ones.
    Every vertex links to its successor, so an accepting path always exists.
    """
    if num_vertices < 2:
        raise ValueError("num_vertices must be >= 2")
    if emission_degree < 1 or transition_degree < 1:
        raise ValueError("degrees must be >= 1")
    if concentration <= 0:
        raise ValueError("concentration must be > 0")
    if transition_degree > num_vertices - 1:
        raise ValueError(
            f"transition degree {transition_degree} exceeds feasible forward-edge "
            f"count {num_vertices - 1}"
        )
    if emission_degree > vocab_size:
        raise ValueError(
            f"emission degree {emission_degree} exceeds vocabulary size {vocab_size}"
        )

    rng = random.Random(seed)
    emissions = []
    transitions = []
    final = num_vertices - 1
    for u in range(num_vertices):
        tokens = rng.sample(range(vocab_size), emission_degree)
        probs = _dirichlet(rng, emission_degree, concentration)
        emissions.append(_sort_sparse(zip(tokens, map(math.log, probs))))

        if u == final:
            transitions.append(())
            continue
        degree = min(transition_degree, num_vertices - 1 - u)
        targets = [u + 1]
        if degree > 1:
            targets += rng.sample(range(u + 2, num_vertices), degree - 1)
        probs = _dirichlet(rng, degree, concentration)
        transitions.append(_sort_sparse(zip(targets, map(math.log, probs))))

    return Dag(
        num_vertices=num_vertices,
        emissions=tuple(emissions),
        transitions=tuple(transitions),
    )


def _dirichlet(rng: random.Random, size: int, concentration: float) -> list[float]:
    if size == 1:
        return [1.0]
    gammas = [max(rng.gammavariate(concentration, 1.0), 1e-300) for _ in range(size)]
    total = math.fsum(gammas)
    return [g / total for g in gammas]
