"""Weighted finite-state acceptors over the (min, +) tropical semiring.

Arc weights are nonnegative costs (negative log-likelihoods); path cost is
the sum of its arc costs and the best path is the cheapest accepting one.
Labels are token ids, with two reserved sentinels: EPSILON arcs consume no
token, SIGMA arcs (constraint automata only) match any single token without
materializing the alphabet.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Iterable, Iterator, NamedTuple, Sequence

from .dag import Dag, PruneConfig, prune_dag
from .result import STATUS_EMPTY, STATUS_OK, DecodeResult

EPSILON = -1
SIGMA = -2

_LABEL_NAMES = {EPSILON: "eps", SIGMA: "sigma"}
WFSA_FORMAT_VERSION = 1


class Arc(NamedTuple):
    label: int
    weight: float
    dst: int


class Wfsa:
    """Mutable during construction, then treated as immutable."""

    __slots__ = ("num_states", "start", "finals", "_arcs")

    def __init__(
        self,
        num_states: int = 0,
        start: int = 0,
        finals: Iterable[int] = (),
        arcs: list[list[Arc]] | None = None,
    ) -> None:
        self.num_states = num_states
        self.start = start
        self.finals: set[int] = set(finals)
        self._arcs: list[list[Arc]] = arcs if arcs is not None else [[] for _ in range(num_states)]
        if len(self._arcs) != num_states:
            raise ValueError("arc table size does not match num_states")

    def add_state(self) -> int:
        self._arcs.append([])
        self.num_states += 1
        return self.num_states - 1

    def add_arc(self, src: int, label: int, weight: float, dst: int) -> None:
        if not (0 <= src < self.num_states and 0 <= dst < self.num_states):
            raise ValueError(f"arc {src}->{dst} references an unknown state")
        if weight < 0:
            raise ValueError(f"negative arc weight {weight}")
        self._arcs[src].append(Arc(label, weight, dst))

    def arcs_from(self, state: int) -> list[Arc]:
        return self._arcs[state]

    def all_arcs(self) -> Iterator[tuple[int, Arc]]:
        for src, arcs in enumerate(self._arcs):
            for arc in arcs:
                yield src, arc

    @property
    def num_arcs(self) -> int:
        return sum(len(a) for a in self._arcs)

    def is_final(self, state: int) -> bool:
        return state in self.finals

    def has_epsilon(self) -> bool:
        return any(arc.label == EPSILON for _, arc in self.all_arcs())

    def has_sigma(self) -> bool:
        return any(arc.label == SIGMA for _, arc in self.all_arcs())

    def copy(self) -> "Wfsa":
        return Wfsa(
            num_states=self.num_states,
            start=self.start,
            finals=set(self.finals),
            arcs=[list(a) for a in self._arcs],
        )


# ---------------------------------------------------------------------------
# Construction


def linear_acceptor(tokens: Sequence[int], weight: float = 0.0) -> Wfsa:
    """Chain acceptor for exactly one token sequence."""
    w = Wfsa(num_states=len(tokens) + 1, start=0, finals={len(tokens)})
    for i, t in enumerate(tokens):
        w.add_arc(i, t, weight, i + 1)
    return w


def dag_to_wfsa(dag: Dag, cfg: PruneConfig) -> Wfsa:
    """Prune a lattice and convert it to an acceptor.

    Vertices become states; each kept (token, successor) pair at a vertex u
    becomes one arc u -> successor labeled with the token and weighted by
    the summed emission and transition negative log-likelihood. The result
    is acyclic and epsilon-free, with vertex 0 as start and the final
    vertex as the unique final state.
    """
    pruned = prune_dag(dag, cfg)
    w = Wfsa(num_states=pruned.num_vertices, start=0, finals={pruned.final_vertex})
    for u in range(pruned.num_vertices):
        for token, elp in pruned.emissions[u]:
            for v, tlp in pruned.transitions[u]:
                w.add_arc(u, token, -(elp + tlp) + 0.0, v)
    return w


def _copy_into(dst: Wfsa, src: Wfsa, offset: int) -> None:
    for s, arc in src.all_arcs():
        dst.add_arc(s + offset, arc.label, arc.weight, arc.dst + offset)


def union(first: Wfsa, *rest: Wfsa) -> Wfsa:
    """Thompson union: accepts any operand's language."""
    operands = (first, *rest)
    total = 1 + sum(a.num_states for a in operands)
    out = Wfsa(num_states=total, start=0)
    offset = 1
    for a in operands:
        _copy_into(out, a, offset)
        out.add_arc(0, EPSILON, 0.0, a.start + offset)
        out.finals.update(f + offset for f in a.finals)
        offset += a.num_states
    return out


def concat(a: Wfsa, b: Wfsa) -> Wfsa:
    """Thompson concatenation: L(a) . L(b)."""
    out = Wfsa(num_states=a.num_states + b.num_states, start=a.start)
    _copy_into(out, a, 0)
    _copy_into(out, b, a.num_states)
    for f in sorted(a.finals):
        out.add_arc(f, EPSILON, 0.0, b.start + a.num_states)
    out.finals = {f + a.num_states for f in b.finals}
    return out


def closure(a: Wfsa) -> Wfsa:
    """Kleene closure: L(a)*, accepting the empty string."""
    out = Wfsa(num_states=a.num_states + 1, start=0, finals={0})
    _copy_into(out, a, 1)
    out.add_arc(0, EPSILON, 0.0, a.start + 1)
    for f in sorted(a.finals):
        out.add_arc(f + 1, EPSILON, 0.0, 0)
    return out


# ---------------------------------------------------------------------------
# Epsilon removal


def _eps_distances(w: Wfsa, source: int) -> dict[int, float]:
    """Cheapest epsilon-only distances from source (includes source at 0)."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, s = heapq.heappop(heap)
        if d > dist.get(s, float("inf")):
            continue
        for arc in w.arcs_from(s):
            if arc.label != EPSILON:
                continue
            nd = d + arc.weight
            if nd < dist.get(arc.dst, float("inf")):
                dist[arc.dst] = nd
                heapq.heappush(heap, (nd, arc.dst))
    return dist


def rm_epsilon(w: Wfsa) -> Wfsa:
    """Remove epsilon arcs, folding their costs into adjacent token arcs.

    The (string -> min cost) map is preserved exactly: each token arc is
    re-emitted for every epsilon prefix of its source and epsilon suffix of
    its target, with the cheapest epsilon path costs added in. A purely
    epsilon accepting path of nonzero cost has no representation in an
    acceptor without final weights and raises ValueError.
    """
    closures = [_eps_distances(w, s) for s in range(w.num_states)]
    out = Wfsa(num_states=w.num_states, start=w.start, finals=set(w.finals))
    for p in range(w.num_states):
        best: dict[tuple[int, int], float] = {}
        for p_mid, d_in in closures[p].items():
            for arc in w.arcs_from(p_mid):
                if arc.label == EPSILON:
                    continue
                for q, d_out in closures[arc.dst].items():
                    cost = d_in + arc.weight + d_out
                    key = (arc.label, q)
                    if cost < best.get(key, float("inf")):
                        best[key] = cost
        for (label, q), cost in sorted(best.items()):
            out.add_arc(p, label, cost, q)

    if w.start not in w.finals:
        eps_final = [closures[w.start][f] for f in w.finals if f in closures[w.start]]
        if eps_final:
            if min(eps_final) > 0.0:
                raise ValueError(
                    "epsilon-only accepting path with nonzero cost cannot be represented"
                )
            out.finals.add(w.start)
    return out


def _rm_epsilon_unweighted(a: Wfsa) -> Wfsa:
    """Language-only epsilon removal for unweighted constraint automata."""
    out = Wfsa(num_states=a.num_states, start=a.start, finals=set(a.finals))
    for s in range(a.num_states):
        reach = _eps_distances(a, s)
        seen: set[tuple[int, int]] = set()
        for r in reach:
            if r in a.finals:
                out.finals.add(s)
            for arc in a.arcs_from(r):
                if arc.label == EPSILON:
                    continue
                key = (arc.label, arc.dst)
                if key not in seen:
                    seen.add(key)
                    out.add_arc(s, arc.label, 0.0, arc.dst)
    return out


# ---------------------------------------------------------------------------
# Sorting, reachability, trimming


def topological_sort(w: Wfsa) -> Wfsa:
    """Renumber states so every arc goes from a lower to a higher index."""
    indegree = [0] * w.num_states
    for _, arc in w.all_arcs():
        indegree[arc.dst] += 1
    heap = [s for s in range(w.num_states) if indegree[s] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        s = heapq.heappop(heap)
        order.append(s)
        for arc in w.arcs_from(s):
            indegree[arc.dst] -= 1
            if indegree[arc.dst] == 0:
                heapq.heappush(heap, arc.dst)
    if len(order) != w.num_states:
        raise ValueError("cycle detected")
    renum = {old: new for new, old in enumerate(order)}
    out = Wfsa(
        num_states=w.num_states,
        start=renum[w.start],
        finals={renum[f] for f in w.finals},
    )
    for s, arc in w.all_arcs():
        out.add_arc(renum[s], arc.label, arc.weight, renum[arc.dst])
    return out


def has_accepting_path(w: Wfsa) -> bool:
    if w.num_states == 0:
        return False
    seen = {w.start}
    stack = [w.start]
    while stack:
        s = stack.pop()
        if s in w.finals:
            return True
        for arc in w.arcs_from(s):
            if arc.dst not in seen:
                seen.add(arc.dst)
                stack.append(arc.dst)
    return False


def trim(w: Wfsa) -> Wfsa:
    """Drop states not on any start-to-final path (keeps relative order)."""
    forward = {w.start}
    stack = [w.start]
    while stack:
        s = stack.pop()
        for arc in w.arcs_from(s):
            if arc.dst not in forward:
                forward.add(arc.dst)
                stack.append(arc.dst)
    rev: list[list[int]] = [[] for _ in range(w.num_states)]
    for s, arc in w.all_arcs():
        rev[arc.dst].append(s)
    backward = set(w.finals)
    stack = list(w.finals)
    while stack:
        s = stack.pop()
        for p in rev[s]:
            if p not in backward:
                backward.add(p)
                stack.append(p)
    alive = sorted(forward & backward)
    if not alive:
        return Wfsa(num_states=1, start=0)
    renum = {old: new for new, old in enumerate(alive)}
    out = Wfsa(
        num_states=len(alive),
        start=renum[w.start],
        finals={renum[f] for f in w.finals if f in renum},
    )
    for s in alive:
        for arc in w.arcs_from(s):
            if arc.dst in renum:
                out.add_arc(renum[s], arc.label, arc.weight, renum[arc.dst])
    return out


# ---------------------------------------------------------------------------
# Intersection


def intersect(w: Wfsa, a: Wfsa) -> Wfsa:
    """Intersect a weighted acceptor with an unweighted constraint.

    The result accepts L(w) & L(a); every surviving path keeps its cost in
    w (constraint weights are ONE by contract and are ignored). Sigma arcs
    in the constraint match any token arc in w. Constraint-side epsilons
    are removed up front, so only w's epsilon arcs survive into the product
    and no redundant epsilon-pairing paths arise; the product is acyclic
    whenever w is.
    """
    if w.has_sigma():
        raise ValueError("weighted operand must not contain sigma arcs")
    if a.has_epsilon():
        a = _rm_epsilon_unweighted(a)
    if w.num_states == 0 or a.num_states == 0:
        return Wfsa(num_states=1, start=0)

    start = (w.start, a.start)
    ids: dict[tuple[int, int], int] = {start: 0}
    queue = [start]
    out = Wfsa(num_states=1, start=0)

    def state_id(pair: tuple[int, int]) -> int:
        sid = ids.get(pair)
        if sid is None:
            sid = out.add_state()
            ids[pair] = sid
            queue.append(pair)
        return sid

    head = 0
    while head < len(queue):
        p, q = queue[head]
        src = ids[(p, q)]
        head += 1
        if p in w.finals and q in a.finals:
            out.finals.add(src)
        for arc in w.arcs_from(p):
            if arc.label == EPSILON:
                out.add_arc(src, EPSILON, arc.weight, state_id((arc.dst, q)))
                continue
            for carc in a.arcs_from(q):
                if carc.label == arc.label or carc.label == SIGMA:
                    out.add_arc(src, arc.label, arc.weight, state_id((arc.dst, carc.dst)))
    return trim(out)


# ---------------------------------------------------------------------------
# Determinization and minimization (unweighted)


def determinize_min(a: Wfsa) -> Wfsa:
    """Deterministic minimal acceptor for an unweighted automaton.

    Subset construction over the automaton's own alphabet followed by
    Hopcroft minimization of the completed DFA; the result has at most one
    arc per (state, token) and no two distinct states accept the same
    language. Wildcard arcs are not supported here (the only determinized
    automata are the static lexicon unions, which contain none).
    """
    if a.has_sigma():
        raise ValueError("cannot determinize an automaton with sigma arcs")
    nf = _rm_epsilon_unweighted(a)
    alphabet = sorted({arc.label for _, arc in nf.all_arcs()})

    start = frozenset({nf.start})
    subsets: dict[frozenset[int], int] = {start: 0}
    worklist = [start]
    dfa_next: list[dict[int, int]] = [{}]
    dfa_final = [bool(start & nf.finals)]
    dead_id: int | None = None

    def subset_id(subset: frozenset[int]) -> int:
        sid = subsets.get(subset)
        if sid is None:
            sid = len(dfa_next)
            subsets[subset] = sid
            dfa_next.append({})
            dfa_final.append(bool(subset & nf.finals))
            worklist.append(subset)
        return sid

    head = 0
    while head < len(worklist):
        subset = worklist[head]
        head += 1
        src = subsets[subset]
        for token in alphabet:
            targets = frozenset(
                arc.dst for s in subset for arc in nf.arcs_from(s) if arc.label == token
            )
            if targets:
                dfa_next[src][token] = subset_id(targets)
            else:
                if dead_id is None:
                    dead_id = subset_id(frozenset())
                dfa_next[src][token] = dead_id

    if dead_id is not None:
        for token in alphabet:
            dfa_next[dead_id][token] = dead_id

    blocks = _hopcroft(len(dfa_next), alphabet, dfa_next, dfa_final)

    order = sorted(set(blocks.values()))
    renum = {b: i for i, b in enumerate(order)}
    out = Wfsa(num_states=len(order), start=renum[blocks[0]])
    emitted: set[int] = set()
    for s in range(len(dfa_next)):
        b = renum[blocks[s]]
        if dfa_final[s]:
            out.finals.add(b)
        if b in emitted:
            continue
        emitted.add(b)
        for token in alphabet:
            out.add_arc(b, token, 0.0, renum[blocks[dfa_next[s][token]]])
    return out


def _hopcroft(
    n: int,
    alphabet: list[int],
    nxt: list[dict[int, int]],
    final: list[bool],
) -> dict[int, int]:
    """Partition-refinement; returns state -> block-id (block = min member)."""
    finals = frozenset(s for s in range(n) if final[s])
    nonfinals = frozenset(range(n)) - finals
    partition = {p for p in (finals, nonfinals) if p}
    work = {min(partition, key=len)} if len(partition) == 2 else set(partition)

    pre: dict[int, list[set[int]]] = {c: [set() for _ in range(n)] for c in alphabet}
    for s in range(n):
        for c in alphabet:
            pre[c][nxt[s][c]].add(s)

    while work:
        splitter = work.pop()
        for c in alphabet:
            x = set()
            for t in splitter:
                x |= pre[c][t]
            if not x:
                continue
            for block in list(partition):
                inter = block & x
                diff = block - x
                if not inter or not diff:
                    continue
                partition.remove(block)
                partition.add(frozenset(inter))
                partition.add(frozenset(diff))
                if block in work:
                    work.remove(block)
                    work.add(frozenset(inter))
                    work.add(frozenset(diff))
                else:
                    work.add(min((frozenset(inter), frozenset(diff)), key=len))
    assignment: dict[int, int] = {}
    for block in partition:
        rep = min(block)
        for s in block:
            assignment[s] = rep
    return assignment


# ---------------------------------------------------------------------------
# Shortest path and enumeration


def shortest_path(w: Wfsa) -> DecodeResult:
    """Cheapest accepting path via one relaxation pass in topological order."""
    if w.num_states == 0:
        return DecodeResult(status=STATUS_EMPTY, note="no states")
    order = _topological_order(w)
    inf = float("inf")
    dist = [inf] * w.num_states
    parent: list[tuple[int, Arc] | None] = [None] * w.num_states
    dist[w.start] = 0.0
    for s in order:
        d = dist[s]
        if d == inf:
            continue
        for arc in w.arcs_from(s):
            if arc.label == SIGMA:
                raise ValueError("cannot decode a path through a sigma arc")
            nd = d + arc.weight
            if nd < dist[arc.dst]:
                dist[arc.dst] = nd
                parent[arc.dst] = (s, arc)
    best_final = min(
        (f for f in w.finals if dist[f] < inf), key=lambda f: (dist[f], f), default=None
    )
    if best_final is None:
        return DecodeResult(status=STATUS_EMPTY, note="no accepting path")
    tokens: list[int] = []
    s = best_final
    while parent[s] is not None:
        src, arc = parent[s]
        if arc.label != EPSILON:
            tokens.append(arc.label)
        s = src
    tokens.reverse()
    return DecodeResult(status=STATUS_OK, tokens=tuple(tokens), cost=dist[best_final])


def _topological_order(w: Wfsa) -> list[int]:
    indegree = [0] * w.num_states
    for _, arc in w.all_arcs():
        indegree[arc.dst] += 1
    heap = [s for s in range(w.num_states) if indegree[s] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        s = heapq.heappop(heap)
        order.append(s)
        for arc in w.arcs_from(s):
            indegree[arc.dst] -= 1
            if indegree[arc.dst] == 0:
                heapq.heappush(heap, arc.dst)
    if len(order) != w.num_states:
        raise ValueError("cycle detected")
    return order


def string_cost(w: Wfsa, tokens: Sequence[int]) -> float:
    """Minimal cost of accepting exactly `tokens`; +inf when rejected.

    Works on any acceptor (epsilon and sigma arcs included) by layered
    relaxation, so it serves as an independent membership/cost oracle.
    """
    inf = float("inf")
    if w.num_states == 0:
        return inf

    def eps_relax(frontier: dict[int, float]) -> dict[int, float]:
        dist = dict(frontier)
        heap = [(c, s) for s, c in frontier.items()]
        heapq.heapify(heap)
        while heap:
            c, s = heapq.heappop(heap)
            if c > dist.get(s, inf):
                continue
            for arc in w.arcs_from(s):
                if arc.label != EPSILON:
                    continue
                nc = c + arc.weight
                if nc < dist.get(arc.dst, inf):
                    dist[arc.dst] = nc
                    heapq.heappush(heap, (nc, arc.dst))
        return dist

    frontier = eps_relax({w.start: 0.0})
    for token in tokens:
        step: dict[int, float] = {}
        for s, c in frontier.items():
            for arc in w.arcs_from(s):
                if arc.label == token or arc.label == SIGMA:
                    nc = c + arc.weight
                    if nc < step.get(arc.dst, inf):
                        step[arc.dst] = nc
        if not step:
            return inf
        frontier = eps_relax(step)
    return min((c for s, c in frontier.items() if s in w.finals), default=inf)


def enumerate_strings(
    w: Wfsa, max_len: int, alphabet: Sequence[int] | None = None
) -> list[tuple[tuple[int, ...], float]]:
    """All accepted token sequences up to max_len with their minimal cost.

    Exponential-time reference implementation for oracle use only. Sigma
    arcs require an explicit alphabet to enumerate over.
    """
    if alphabet is None:
        if w.has_sigma():
            raise ValueError("sigma arcs present: supply an explicit alphabet")
        alphabet = sorted({arc.label for _, arc in w.all_arcs() if arc.label != EPSILON})
    else:
        alphabet = sorted(set(alphabet))
    out = []
    for length in range(max_len + 1):
        for tokens in itertools.product(alphabet, repeat=length):
            cost = string_cost(w, tokens)
            if cost < float("inf"):
                out.append((tokens, cost))
    return out


# ---------------------------------------------------------------------------
# Textual dump format


def _label_to_text(label: int) -> str:
    name = _LABEL_NAMES.get(label)
    return name if name is not None else f"tok:{label}"


def _label_from_text(text: str) -> int:
    if text == "eps":
        return EPSILON
    if text == "sigma":
        return SIGMA
    if text.startswith("tok:"):
        return int(text[4:])
    raise ValueError(f"unknown arc label {text!r}")


def dump_wfsa(w: Wfsa) -> str:
    """Canonical textual dump; arcs ordered by (src, label, dst)."""
    lines = [
        f"#version {WFSA_FORMAT_VERSION}",
        f"states\t{w.num_states}",
        f"start\t{w.start}",
    ]
    lines.extend(f"final\t{f}" for f in sorted(w.finals))
    arcs = sorted(
        ((s, arc) for s, arc in w.all_arcs()),
        key=lambda e: (e[0], e[1].label != EPSILON, e[1].label != SIGMA, e[1].label, e[1].dst, e[1].weight),
    )
    lines.extend(f"{s}\t{a.dst}\t{_label_to_text(a.label)}\t{a.weight!r}" for s, a in arcs)
    return "\n".join(lines) + "\n"


def load_wfsa(text: str) -> Wfsa:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != f"#version {WFSA_FORMAT_VERSION}":
        raise ValueError("missing or unsupported automaton dump version")
    start = 0
    finals: set[int] = set()
    arcs: list[tuple[int, int, int, float]] = []
    num_states = None
    for line in lines[1:]:
        fields = line.split("\t")
        if fields[0] == "states":
            num_states = int(fields[1])
        elif fields[0] == "start":
            start = int(fields[1])
        elif fields[0] == "final":
            finals.add(int(fields[1]))
        else:
            src, dst, label, cost = fields
            arcs.append((int(src), int(dst), _label_from_text(label), float(cost)))
    if num_states is None:
        raise ValueError("dump lacks a states header")
    w = Wfsa(num_states=num_states, start=start, finals=finals)
    for src, dst, label, cost in arcs:
        w.add_arc(src, label, cost, dst)
    return w
