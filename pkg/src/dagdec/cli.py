"""Command-line surface: decode lattices under constraints, build lexicons,
fit length predictors, evaluate outputs, and generate synthetic fixtures.

All decode output is JSON-lines (UTF-8, LF). Exit codes: 0 on success, 1
for I/O and validation errors, 3 when decoding itself is infeasible (an
empty constraint intersection or no path within the length bound).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass, replace

from .cbs import beam_decode, cbs_dag_decode, greedy_decode
from .constraints import (
    build_hlc_fsa,
    build_vocab_fsa,
    extract_lexicon,
    tokenize_phrase,
)
from .dag import PruneConfig, generate_synthetic_dag, prune_dag, read_dag, write_dag
from .length import (
    LcConfig,
    dfs_viterbi,
    fit_length_predictor,
    load_length_predictor,
    predict_target_length,
    save_length_predictor,
)
from .metrics import EvalRecord, build_eval_vocabulary, compute_report
from .result import STATUS_EMPTY_INTERSECTION, STATUS_OK, DecodeResult
from .tokens import TokenTable, read_token_table, write_token_table
from .wfsa import (
    dag_to_wfsa,
    has_accepting_path,
    intersect,
    rm_epsilon,
    shortest_path,
    topological_sort,
)

MODES = ("greedy", "beam", "cbs-dag", "wfsa-shortest", "hlc", "vc", "lc", "control-dag")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 3


@dataclass(frozen=True)
class DecodeJob:
    """Everything one decode needs; validated against the selected mode."""

    dag_path: str
    table_path: str
    mode: str
    constraints_path: str | None = None
    constraint_line: int = 0
    lexicon_path: str | None = None
    specials_path: str | None = None
    k_e: int = 3
    k_t: int = 3
    beam: int = 4
    target_length: int | None = None
    predictor_path: str | None = None
    input_length: int | None = None
    strictness: float = 1.0
    edge_prune_threshold: float = 0.7
    upper_bound: int | None = None
    references: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r} (expected one of {MODES})")
        if self.mode in ("hlc", "cbs-dag") and self.constraints_path is None:
            raise ValueError(f"mode {self.mode} requires a constraint file")
        if self.mode == "vc" and self.lexicon_path is None:
            raise ValueError("mode vc requires a lexicon")
        if self.mode in ("lc", "control-dag"):
            if self.target_length is None and self.predictor_path is None:
                raise ValueError(f"mode {self.mode} requires --target-len or --len-predictor")
            if self.predictor_path is not None and self.target_length is None and self.input_length is None:
                raise ValueError("--len-predictor requires --input-len")


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _load_constraints(job: DecodeJob) -> tuple[list[str], list[str]]:
    """Phrase and entity surfaces for this job from its constraint file."""
    if job.constraints_path is None:
        return [], []
    lines = [ln for ln in _read_lines(job.constraints_path) if ln.strip()]
    if not 0 <= job.constraint_line < len(lines):
        raise ValueError(
            f"constraint line {job.constraint_line} out of range for {job.constraints_path}"
        )
    doc = json.loads(lines[job.constraint_line])
    return list(doc.get("phrases", [])), list(doc.get("entities", []))


def _resolve_target_length(job: DecodeJob) -> int:
    if job.target_length is not None:
        return job.target_length
    pred = load_length_predictor(job.predictor_path)
    return predict_target_length(pred, job.input_length)


def run_decode(job: DecodeJob) -> DecodeResult:
    """Execute one decode job; the wall time covers decoding only."""
    job.validate()
    dag = read_dag(job.dag_path)
    table = read_token_table(job.table_path)
    phrase_surfaces, entity_surfaces = _load_constraints(job)
    phrases = [tokenize_phrase(s, table) for s in phrase_surfaces]

    use_hlc = job.mode in ("hlc", "control-dag") and bool(phrases)
    use_vc = job.mode in ("vc", "control-dag") and job.lexicon_path is not None
    use_lc = job.mode in ("lc", "control-dag")

    vocab_fsa = None
    if use_vc:
        dictionary = [w for w in _read_lines(job.lexicon_path) if w]
        specials = None
        if job.specials_path is not None:
            specials = [s for s in _read_lines(job.specials_path) if s]
        vocab_fsa = build_vocab_fsa(dictionary, specials, entity_surfaces, table)

    prune_cfg = PruneConfig(k_e=job.k_e, k_t=job.k_t, constraints=tuple(phrases))

    started = time.perf_counter()
    if job.mode == "greedy":
        result = greedy_decode(dag)
    elif job.mode == "beam":
        result = beam_decode(prune_dag(dag, prune_cfg), job.beam)
    elif job.mode == "cbs-dag":
        result = cbs_dag_decode(prune_dag(dag, prune_cfg), phrases, job.beam)
    else:
        w = dag_to_wfsa(dag, prune_cfg)
        if use_hlc:
            for phrase in phrases:
                w = intersect(w, build_hlc_fsa(phrase))
        if use_vc:
            w = intersect(w, vocab_fsa.automaton)
        if (use_hlc or use_vc) and not has_accepting_path(w):
            result = DecodeResult(
                status=STATUS_EMPTY_INTERSECTION,
                note="constraint intersection has no accepting path",
            )
        elif use_lc:
            w = topological_sort(rm_epsilon(w))
            cfg = LcConfig(
                target_length=_resolve_target_length(job),
                strictness=job.strictness,
                edge_prune_threshold=job.edge_prune_threshold,
                upper_bound=job.upper_bound,
            )
            result = dfs_viterbi(w, cfg)
        else:
            result = shortest_path(w)
    elapsed = time.perf_counter() - started

    if result.status == STATUS_OK:
        flags = tuple(_contains(result.tokens, p.tokens) for p in phrases)
        if not result.constraints_met:
            result = replace(result, constraints_met=flags)
        result = replace(result, text=table.detokenize(result.tokens))
    extra = dict(result.extra)
    extra.update({"mode": job.mode, "wall_time_s": elapsed, "dag": job.dag_path})
    return replace(result, extra=extra)


def _contains(haystack: tuple[int, ...], needle: tuple[int, ...]) -> bool:
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


# ---------------------------------------------------------------------------
# Batch running


def _job_from_manifest(entry: dict, defaults: DecodeJob) -> DecodeJob:
    fields = {
        "dag": "dag_path",
        "table": "table_path",
        "mode": "mode",
        "constraints": "constraints_path",
        "constraint_line": "constraint_line",
        "lexicon": "lexicon_path",
        "specials": "specials_path",
        "ke": "k_e",
        "kt": "k_t",
        "beam": "beam",
        "target_len": "target_length",
        "len_predictor": "predictor_path",
        "input_len": "input_length",
        "strictness": "strictness",
        "edge_prune_p": "edge_prune_threshold",
        "len_upper": "upper_bound",
        "references": "references",
    }
    overrides = {}
    for key, attr in fields.items():
        if key in entry:
            value = entry[key]
            overrides[attr] = tuple(value) if attr == "references" else value
    return replace(defaults, **overrides)


def run_batch(manifest_path: str, defaults: DecodeJob, parallelism: int = 1) -> dict:
    """Run every job in the manifest; failures are recorded, not fatal.

    Returns {"results": [per-job dicts in manifest order], "summary": {...}}.
    """
    entries = [json.loads(ln) for ln in _read_lines(manifest_path) if ln.strip()]
    jobs = [_job_from_manifest(e, defaults) for e in entries]

    def run_one(idx: int) -> dict:
        try:
            result = run_decode(jobs[idx])
            payload = result.to_dict()
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            payload = {"status": "error", "error": str(exc)}
        payload["job"] = idx
        return payload

    if parallelism <= 1:
        results = [run_one(i) for i in range(len(jobs))]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run_one, range(len(jobs))))

    records = []
    vocab_words: set[str] = set()
    for entry, job, payload in zip(entries, jobs, results):
        if payload.get("status") != STATUS_OK or payload.get("text") is None:
            continue
        phrases: list[str] = []
        entities: list[str] = []
        if job.constraints_path:
            phrases, entities = _load_constraints(job)
        records.append(
            EvalRecord(
                output=payload["text"],
                required_values=tuple(phrases),
                references=tuple(job.references),
            )
        )
        for surface in list(phrases) + list(entities):
            vocab_words.update(surface.split())
        if job.lexicon_path:
            vocab_words.update(w for w in _read_lines(job.lexicon_path) if w)

    vocab = build_eval_vocabulary(extra_words=vocab_words) if vocab_words else None
    summary = {
        "jobs": len(jobs),
        "decoded": sum(1 for r in results if r.get("status") == STATUS_OK),
        "errors": sum(1 for r in results if r.get("status") == "error"),
        "infeasible": sum(
            1 for r in results if r.get("status") not in (STATUS_OK, "error")
        ),
        "metrics": compute_report(records, vocab) if records else None,
    }
    return {"results": results, "summary": summary}


# ---------------------------------------------------------------------------
# Argument parsing


def _add_decode_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dag", help="lattice JSON file")
    p.add_argument("--table", help="token table file")
    p.add_argument("--mode", choices=MODES, default="wfsa-shortest")
    p.add_argument("--constraints", help="JSON-lines constraint file")
    p.add_argument("--constraint-line", type=int, default=0)
    p.add_argument("--lexicon", help="word-per-line lexicon file")
    p.add_argument("--specials", help="token-per-line specials file")
    p.add_argument("--ke", type=int, default=3, help="emission pruning degree")
    p.add_argument("--kt", type=int, default=3, help="transition pruning degree")
    p.add_argument("--beam", type=int, default=4, help="base beam size")
    p.add_argument("--target-len", type=int, help="target output length in tokens")
    p.add_argument("--len-predictor", help="two-line slope/intercept file")
    p.add_argument("--input-len", type=int, help="input length for the predictor")
    p.add_argument("--strictness", type=float, default=1.0)
    p.add_argument("--edge-prune-p", type=float, default=0.7)
    p.add_argument("--len-upper", type=int, help="override the length upper bound")
    p.add_argument("--out", help="output file (default stdout)")


def _job_from_args(args: argparse.Namespace, require_paths: bool = True) -> DecodeJob:
    if require_paths and (not args.dag or not args.table):
        raise ValueError("--dag and --table are required")
    return DecodeJob(
        dag_path=args.dag or "",
        table_path=args.table or "",
        mode=args.mode,
        constraints_path=args.constraints,
        constraint_line=args.constraint_line,
        lexicon_path=args.lexicon,
        specials_path=args.specials,
        k_e=args.ke,
        k_t=args.kt,
        beam=args.beam,
        target_length=args.target_len,
        predictor_path=args.len_predictor,
        input_length=args.input_len,
        strictness=args.strictness,
        edge_prune_threshold=args.edge_prune_p,
        upper_bound=args.len_upper,
    )


def _emit(lines: list[str], out_path: str | None) -> None:
    text = "".join(line + "\n" for line in lines)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dagdec", description="Constrained decoding over token lattices"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_decode = sub.add_parser("decode", help="decode one lattice")
    _add_decode_args(p_decode)

    p_batch = sub.add_parser("batch", help="decode a manifest of jobs")
    _add_decode_args(p_batch)
    p_batch.add_argument("--manifest", required=True, help="JSON-lines job manifest")
    p_batch.add_argument("--parallel", type=int, default=1)

    p_lex = sub.add_parser("lexicon", help="extract a frequency lexicon from a corpus")
    p_lex.add_argument("--corpus", required=True, help="text file, one sentence per line")
    p_lex.add_argument("--cutoff", type=float, default=0.9)
    p_lex.add_argument("--out", help="output file (default stdout)")

    p_fit = sub.add_parser("fit-length", help="fit the linear length predictor")
    p_fit.add_argument("--pairs", required=True, help="TSV file: input_len<TAB>output_len")
    p_fit.add_argument("--out", help="predictor file (default stdout)")

    p_synth = sub.add_parser("synth", help="generate a synthetic lattice fixture")
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--vertices", type=int, required=True)
    p_synth.add_argument("--emission-degree", type=int, default=3)
    p_synth.add_argument("--transition-degree", type=int, default=3)
    p_synth.add_argument(
        "--concentration",
        type=float,
        default=0.6,
        help="Dirichlet concentration; 0.6 matches trained-lattice sparsity",
    )
    p_synth.add_argument("--vocab-size", type=int, default=32)
    p_synth.add_argument("--out", required=True, help="lattice JSON output path")
    p_synth.add_argument("--table-out", help="also write a matching token table")

    p_eval = sub.add_parser("evaluate", help="score decoded outputs")
    p_eval.add_argument("--records", required=True, help="JSON-lines eval records")
    p_eval.add_argument("--vocab", help="word-per-line vocabulary for neologism rate")
    p_eval.add_argument("--out", help="report file (default stdout)")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "decode":
        result = run_decode(_job_from_args(args))
        _emit([json.dumps(result.to_dict(), ensure_ascii=False)], args.out)
        return EXIT_OK if result.status == STATUS_OK else EXIT_INFEASIBLE

    if args.command == "batch":
        # jobs may supply dag/table themselves, so the defaults can omit them
        defaults = _job_from_args(args, require_paths=False)
        outcome = run_batch(args.manifest, defaults, parallelism=args.parallel)
        lines = [json.dumps(r, ensure_ascii=False) for r in outcome["results"]]
        lines.append(json.dumps({"summary": outcome["summary"]}, ensure_ascii=False))
        _emit(lines, args.out)
        return EXIT_OK

    if args.command == "lexicon":
        corpus = _read_lines(args.corpus)
        words = extract_lexicon(corpus, args.cutoff)
        _emit(words, args.out)
        return EXIT_OK

    if args.command == "fit-length":
        pairs = []
        for line in _read_lines(args.pairs):
            if not line.strip():
                continue
            x, y = line.split()[:2]
            pairs.append((float(x), float(y)))
        pred = fit_length_predictor(pairs)
        if args.out:
            save_length_predictor(pred, args.out)
        else:
            _emit([repr(pred.slope), repr(pred.intercept)], None)
        return EXIT_OK

    if args.command == "synth":
        dag = generate_synthetic_dag(
            seed=args.seed,
            num_vertices=args.vertices,
            emission_degree=args.emission_degree,
            transition_degree=args.transition_degree,
            concentration=args.concentration,
            vocab_size=args.vocab_size,
        )
        write_dag(dag, args.out)
        if args.table_out:
            write_token_table(synthetic_token_table(args.vocab_size), args.table_out)
        return EXIT_OK

    if args.command == "evaluate":
        records = []
        for line in _read_lines(args.records):
            if not line.strip():
                continue
            doc = json.loads(line)
            records.append(
                EvalRecord(
                    output=doc["output"],
                    required_values=tuple(doc.get("required_values", [])),
                    references=tuple(doc.get("references", [])),
                )
            )
        vocab = None
        if args.vocab:
            vocab = build_eval_vocabulary(extra_words=[w for w in _read_lines(args.vocab) if w])
        _emit([json.dumps(compute_report(records, vocab), ensure_ascii=False)], args.out)
        return EXIT_OK

    raise ValueError(f"unknown command {args.command!r}")


def synthetic_token_table(vocab_size: int) -> TokenTable:
    """Toy table covering synthetic lattice ids: word tokens plus markers."""
    width = max(3, len(str(vocab_size - 1)))
    surfaces = [f"▁w{i:0{width}d}" for i in range(vocab_size)]
    surfaces += ["<s>", "</s>"]
    return TokenTable(
        surfaces=tuple(surfaces),
        sow_mark="▁",
        eos_id=vocab_size + 1,
        sos_id=vocab_size,
    )


if __name__ == "__main__":
    raise SystemExit(main())
