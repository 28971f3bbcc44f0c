"""Constraint automata: must-appear phrases and permitted vocabularies.

A hard lexical constraint compiles to an acceptor for "anything, then the
phrase, then anything", built from the phrase's string-matching automaton.
A vocabulary constraint is the Kleene closure of the union of a dictionary
automaton, a special-token automaton, and per-input entity automata; only
token sequences that concatenate permitted word units survive it.
"""

from __future__ import annotations

import hashlib
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import wfsa
from .tokens import TokenTable, dump_token_table
from .wfsa import SIGMA, Wfsa, closure, determinize_min, linear_acceptor, union
from .words import is_numeric_token, strip_punct

# Punctuation accepted by the default special-token automaton.
DEFAULT_SPECIAL_PUNCTUATION = "$&'()*+,-./:;=>?@[]_"


@dataclass(frozen=True)
class ConstraintPhrase:
    """A token sequence that must appear contiguously in the output."""

    tokens: tuple[int, ...]
    surface: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("constraint phrase must be nonempty")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class LexiconFsa:
    """Vocabulary acceptor plus provenance counts for reporting."""

    automaton: Wfsa
    dictionary_words: int
    special_tokens: int
    dynamic_entities: int


def kmp_failure(tokens: Sequence[int]) -> list[int]:
    """Classic prefix-function: failure[i] = longest proper border of tokens[:i+1]."""
    failure = [0] * len(tokens)
    k = 0
    for i in range(1, len(tokens)):
        while k > 0 and tokens[i] != tokens[k]:
            k = failure[k - 1]
        if tokens[i] == tokens[k]:
            k += 1
        failure[i] = k
    return failure


def kmp_step(tokens: Sequence[int], failure: Sequence[int], state: int, token: int) -> int:
    """Matcher transition; a completed match (state == len) is sticky."""
    m = len(tokens)
    if state == m:
        return m
    j = state
    while j > 0 and tokens[j] != token:
        j = failure[j - 1]
    return j + 1 if tokens[j] == token else 0


def build_hlc_fsa(phrase: ConstraintPhrase) -> Wfsa:
    """Acceptor for all strings containing the phrase contiguously.

    States are matcher states 0..m; phrase-alphabet tokens follow the
    failure-function transitions (so overlapping prefixes such as "aab" in
    "aaab" are tracked correctly), every other token falls back to state 0
    via a wildcard arc, and the accepting state absorbs everything.
    """
    toks = phrase.tokens
    m = len(toks)
    failure = kmp_failure(toks)
    a = Wfsa(num_states=m + 1, start=0, finals={m})
    for state in range(m):
        for token in sorted(set(toks)):
            a.add_arc(state, token, 0.0, kmp_step(toks, failure, state, token))
        a.add_arc(state, SIGMA, 0.0, 0)
    a.add_arc(m, SIGMA, 0.0, m)
    return a


def tokenize_phrase(surface: str, table: TokenTable) -> ConstraintPhrase:
    """Greedy longest-match segmentation against the token table.

    Word-initial pieces are looked up with the start-of-word mark first
    (falling back to the bare form, which covers punctuation-only words);
    continuations are looked up bare. Multi-word surfaces tokenize word by
    word into a single phrase.
    """
    words = surface.split()
    if not words:
        raise ValueError("cannot tokenize an empty phrase")
    token_ids: list[int] = []
    for word in words:
        pos = 0
        while pos < len(word):
            match = None
            prefixes = (table.sow_mark, "") if pos == 0 else ("",)
            for prefix in prefixes:
                for end in range(len(word), pos, -1):
                    tid = table.lookup(prefix + word[pos:end])
                    if tid is not None:
                        match = (tid, end)
                        break
                if match:
                    break
            if match is None:
                raise ValueError(
                    f"cannot segment {word[pos:]!r} of word {word!r} with this token table"
                )
            token_ids.append(match[0])
            pos = match[1]
    return ConstraintPhrase(tokens=tuple(token_ids), surface=surface)


def extract_lexicon(corpus: Iterable[str], cumulative_cutoff: float) -> list[str]:
    """Frequent unigrams covering the requested share of the corpus mass.

    Space-delimited unigrams are stripped of edge punctuation; empty and
    numeric residues are dropped and true case is kept. Words are ordered
    by descending frequency (ties lexicographic) and truncated at the
    smallest prefix whose cumulative frequency reaches the cutoff.
    """
    if not 0.0 < cumulative_cutoff <= 1.0:
        raise ValueError("cumulative_cutoff must be in (0, 1]")
    counts: Counter[str] = Counter()
    for line in corpus:
        for raw in line.split():
            word = strip_punct(raw)
            if not word or is_numeric_token(word):
                continue
            counts[word] += 1
    total = sum(counts.values())
    if total == 0:
        return []
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    lexicon: list[str] = []
    mass = 0
    for word, count in ranked:
        lexicon.append(word)
        mass += count
        if mass >= cumulative_cutoff * total:
            break
    return lexicon


def default_specials(table: TokenTable) -> list[str]:
    """Sequence markers, the start-of-word mark, and available punctuation.

    Candidates absent from the table (a bare start-of-word token, most
    punctuation in toy tables) are skipped.
    """
    specials = [table.surface(table.sos_id), table.surface(table.eos_id)]
    for ch in (table.sow_mark,) + tuple(DEFAULT_SPECIAL_PUNCTUATION):
        if table.lookup(ch) is not None:
            specials.append(ch)
    seen: set[str] = set()
    out = []
    for s in specials:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def _numeric_token_ids(table: TokenTable) -> list[int]:
    ids = []
    for tid, surface in enumerate(table.surfaces):
        bare = surface[len(table.sow_mark):] if surface.startswith(table.sow_mark) else surface
        if bare.isdigit():
            ids.append(tid)
    return ids


_static_cache: dict[str, Wfsa] = {}


def _static_cache_key(
    dictionary: Sequence[str],
    specials: Sequence[str],
    include_numeric: bool,
    table: TokenTable,
) -> str:
    h = hashlib.sha256()
    for word in dictionary:
        h.update(word.encode("utf-8") + b"\x00")
    h.update(b"\x01")
    for s in specials:
        h.update(s.encode("utf-8") + b"\x00")
    h.update(b"\x02" + (b"1" if include_numeric else b"0"))
    h.update(dump_token_table(table).encode("utf-8"))
    return h.hexdigest()


def build_static_vocab_fsa(
    dictionary: Sequence[str],
    specials: Sequence[str],
    table: TokenTable,
    include_numeric: bool = True,
) -> Wfsa:
    """Deterministic minimal acceptor for dictionary words and specials.

    This is the one-time-optimized static component; dynamic entities are
    unioned in afterwards, per input.
    """
    parts: list[Wfsa] = []
    for word in dictionary:
        parts.append(linear_acceptor(tokenize_phrase(word, table).tokens))
    for s in specials:
        tid = table.lookup(s)
        if tid is None:
            raise ValueError(f"special token {s!r} is not in the token table")
        parts.append(linear_acceptor((tid,)))
    if include_numeric:
        for tid in _numeric_token_ids(table):
            parts.append(linear_acceptor((tid,)))
    if not parts:
        return Wfsa(num_states=1, start=0)  # empty language
    return determinize_min(union(*parts))


def build_vocab_fsa(
    dictionary: Sequence[str],
    specials: Sequence[str] | None,
    dynamic_entities: Sequence[str],
    table: TokenTable,
    include_numeric: bool = True,
    cache_dir: str | None = None,
) -> LexiconFsa:
    """Closure of (static dictionary+specials) union (per-input entities).

    The static component is determinized and minimized once and cached by
    content hash (in memory, and on disk under cache_dir when given). The
    result accepts exactly the concatenations of permitted word units,
    including the empty string.
    """
    if specials is None:
        specials = default_specials(table)
    key = _static_cache_key(dictionary, specials, include_numeric, table)
    static = _static_cache.get(key)
    if static is None and cache_dir is not None:
        path = os.path.join(cache_dir, f"{key}.fsa")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                static = wfsa.load_wfsa(fh.read())
    if static is None:
        static = build_static_vocab_fsa(dictionary, specials, table, include_numeric)
        if cache_dir is not None:
            os.makedirs(cache_dir, exist_ok=True)
            path = os.path.join(cache_dir, f"{key}.fsa")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(wfsa.dump_wfsa(static))
    _static_cache[key] = static

    dynamic = [
        linear_acceptor(tokenize_phrase(entity, table).tokens) for entity in dynamic_entities
    ]
    combined = union(static, *dynamic) if dynamic else static
    return LexiconFsa(
        automaton=closure(combined),
        dictionary_words=len(dictionary),
        special_tokens=len(specials),
        dynamic_entities=len(dynamic_entities),
    )
