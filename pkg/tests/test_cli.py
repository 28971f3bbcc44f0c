"""End-to-end command-line behavior: decode modes, batch, tooling commands."""

from __future__ import annotations

import json

import pytest

from dagdec.cli import (
    EXIT_ERROR,
    EXIT_INFEASIBLE,
    EXIT_OK,
    DecodeJob,
    main,
    run_decode,
)
from dagdec.dag import PruneConfig, write_dag
from dagdec.tokens import write_token_table
from dagdec.wfsa import dag_to_wfsa, shortest_path

from .lattices import control_fixture, tiny4, toy_table, vocab_fixture
from .oracles import contains_subsequence


def phrase_surface(table, tokens):
    return " ".join(table.surface(t).lstrip(table.sow_mark) for t in tokens)


@pytest.fixture()
def workspace(tmp_path):
    """tiny4 lattice + a toy table wide enough for its token ids."""
    dag_path = tmp_path / "tiny4.json"
    write_dag(tiny4(), str(dag_path))
    table = toy_table(10)
    table_path = tmp_path / "toy.table"
    write_token_table(table, str(table_path))
    return tmp_path, str(dag_path), str(table_path), table


def write_constraints(tmp_path, entries):
    path = tmp_path / "constraints.jsonl"
    path.write_text("".join(json.dumps(e) + "\n" for e in entries), encoding="utf-8")
    return str(path)


def write_lexicon(tmp_path, words):
    path = tmp_path / "lexicon.txt"
    path.write_text("".join(w + "\n" for w in words), encoding="utf-8")
    return str(path)


class TestDecodeModes:
    def test_wfsa_shortest_is_thin_binding(self, workspace):
        tmp_path, dag_path, table_path, table = workspace
        job = DecodeJob(dag_path=dag_path, table_path=table_path,
                        mode="wfsa-shortest", k_e=2, k_t=2)
        got = run_decode(job)
        lib = shortest_path(dag_to_wfsa(tiny4(), PruneConfig(k_e=2, k_t=2)))
        assert got.tokens == lib.tokens
        assert got.cost == pytest.approx(lib.cost, abs=1e-12)
        assert got.text == table.detokenize(lib.tokens)
        assert got.extra["wall_time_s"] >= 0.0

    def test_hlc_contains_phrase(self, workspace):
        tmp_path, dag_path, table_path, table = workspace
        # plant the less likely bigram (1, 3): emissions at vertices 0 and 1
        surface = phrase_surface(table, (1, 3))
        cons = write_constraints(tmp_path, [{"phrases": [surface]}])
        job = DecodeJob(dag_path=dag_path, table_path=table_path, mode="hlc",
                        constraints_path=cons, k_e=2, k_t=2)
        got = run_decode(job)
        assert got.status == "ok"
        assert contains_subsequence(got.tokens, (1, 3))
        assert got.constraints_met == (True,)
        assert surface in got.text

    def test_hlc_unreachable_phrase_empty_intersection(self, workspace):
        tmp_path, dag_path, table_path, table = workspace
        cons = write_constraints(tmp_path, [{"phrases": [phrase_surface(table, (9, 9))]}])
        job = DecodeJob(dag_path=dag_path, table_path=table_path, mode="hlc",
                        constraints_path=cons, k_e=2, k_t=2)
        got = run_decode(job)
        assert got.status == "empty_intersection"

    def test_greedy_and_beam_and_cbs(self, workspace):
        tmp_path, dag_path, table_path, table = workspace
        for mode in ("greedy", "beam", "cbs-dag"):
            cons = None
            if mode == "cbs-dag":
                cons = write_constraints(tmp_path, [{"phrases": [phrase_surface(table, (3,))]}])
            job = DecodeJob(dag_path=dag_path, table_path=table_path, mode=mode,
                            constraints_path=cons, k_e=2, k_t=2, beam=3)
            got = run_decode(job)
            assert got.status == "ok"
            assert got.tokens

    def test_vc_mode_stays_in_lexicon(self, tmp_path):
        dag, table, lexicon, lex_ids = vocab_fixture(seed=5)
        dag_path = tmp_path / "vc.json"
        write_dag(dag, str(dag_path))
        table_path = tmp_path / "vc.table"
        write_token_table(table, str(table_path))
        lex_path = write_lexicon(tmp_path, lexicon)
        job = DecodeJob(dag_path=str(dag_path), table_path=str(table_path),
                        mode="vc", lexicon_path=lex_path, k_e=2, k_t=2)
        got = run_decode(job)
        assert got.status == "ok"
        assert all(t in lex_ids for t in got.tokens)

    def test_lc_mode_respects_upper_bound(self, workspace):
        tmp_path, dag_path, table_path, table = workspace
        job = DecodeJob(dag_path=dag_path, table_path=table_path, mode="lc",
                        target_length=3, k_e=2, k_t=2, edge_prune_threshold=1.0)
        got = run_decode(job)
        assert got.status == "ok"
        assert 1 <= len(got.tokens) <= 4  # min(3+5, floor(4.5)) = 4
        assert got.adjusted_cost is not None

    def test_control_dag_composite(self, tmp_path):
        dag, table, lexicon, phrases, target = control_fixture(seed=3)
        dag_path = tmp_path / "c.json"
        write_dag(dag, str(dag_path))
        table_path = tmp_path / "c.table"
        write_token_table(table, str(table_path))
        lex_path = write_lexicon(tmp_path, lexicon)
        cons = write_constraints(tmp_path, [{"phrases": phrases, "entities": phrases}])
        job = DecodeJob(dag_path=str(dag_path), table_path=str(table_path),
                        mode="control-dag", constraints_path=cons,
                        lexicon_path=lex_path, target_length=target,
                        k_e=2, k_t=2, edge_prune_threshold=1.0)
        got = run_decode(job)
        assert got.status == "ok"
        for surface in phrases:
            assert surface in got.text
        assert all(got.constraints_met)

    def test_predictor_resolves_target(self, workspace, tmp_path):
        _, dag_path, table_path, _ = workspace
        pred_path = tmp_path / "pred.txt"
        pred_path.write_text("0.5\n1.9\n", encoding="utf-8")
        job = DecodeJob(dag_path=dag_path, table_path=table_path, mode="lc",
                        predictor_path=str(pred_path), input_length=2,
                        k_e=2, k_t=2)
        got = run_decode(job)  # target ceil(0.5*2+1.9) = 3
        assert got.status == "ok"

    def test_job_validation(self, workspace):
        _, dag_path, table_path, _ = workspace
        with pytest.raises(ValueError, match="requires a constraint file"):
            run_decode(DecodeJob(dag_path=dag_path, table_path=table_path, mode="hlc"))
        with pytest.raises(ValueError, match="requires a lexicon"):
            run_decode(DecodeJob(dag_path=dag_path, table_path=table_path, mode="vc"))
        with pytest.raises(ValueError, match="--target-len or --len-predictor"):
            run_decode(DecodeJob(dag_path=dag_path, table_path=table_path, mode="lc"))
        with pytest.raises(ValueError, match="unknown mode"):
            run_decode(DecodeJob(dag_path=dag_path, table_path=table_path, mode="nope"))


class TestMainEntry:
    def test_decode_writes_json_line(self, workspace, capsys):
        _, dag_path, table_path, _ = workspace
        code = main(["decode", "--dag", dag_path, "--table", table_path,
                     "--mode", "wfsa-shortest", "--ke", "2", "--kt", "2"])
        assert code == EXIT_OK
        line = capsys.readouterr().out.strip()
        doc = json.loads(line)
        assert doc["status"] == "ok"
        assert doc["mode"] == "wfsa-shortest"
        assert isinstance(doc["tokens"], list)

    def test_infeasible_exit_code(self, workspace):
        tmp_path, dag_path, table_path, table = workspace
        cons = write_constraints(tmp_path, [{"phrases": [phrase_surface(table, (9, 9))]}])
        code = main(["decode", "--dag", dag_path, "--table", table_path,
                     "--mode", "hlc", "--constraints", cons,
                     "--ke", "2", "--kt", "2", "--out", str(tmp_path / "o.jsonl")])
        assert code == EXIT_INFEASIBLE

    def test_io_error_exit_code(self, tmp_path, capsys):
        code = main(["decode", "--dag", str(tmp_path / "missing.json"),
                     "--table", str(tmp_path / "missing.table")])
        assert code == EXIT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_lexicon_command(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("a a a b\n", encoding="utf-8")
        code = main(["lexicon", "--corpus", str(corpus), "--cutoff", "0.7"])
        assert code == EXIT_OK
        assert capsys.readouterr().out.split() == ["a"]

    def test_fit_length_command(self, tmp_path):
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text("1\t2\n2\t4\n3\t6\n", encoding="utf-8")
        out = tmp_path / "pred.txt"
        code = main(["fit-length", "--pairs", str(pairs), "--out", str(out)])
        assert code == EXIT_OK
        slope, intercept = [float(x) for x in out.read_text().split()]
        assert slope == pytest.approx(2.0, abs=1e-9)
        assert intercept == pytest.approx(0.0, abs=1e-9)

    def test_synth_command_round_trips(self, tmp_path):
        out = tmp_path / "synth.json"
        table_out = tmp_path / "synth.table"
        code = main(["synth", "--seed", "7", "--vertices", "12", "--out", str(out),
                     "--table-out", str(table_out), "--vocab-size", "16"])
        assert code == EXIT_OK
        code = main(["decode", "--dag", str(out), "--table", str(table_out),
                     "--mode", "greedy", "--out", str(tmp_path / "g.jsonl")])
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "g.jsonl").read_text())
        assert doc["status"] == "ok"

    def test_evaluate_command(self, tmp_path, capsys):
        records = tmp_path / "records.jsonl"
        records.write_text(
            json.dumps({"output": "a b", "required_values": ["a"], "references": ["a b"]})
            + "\n",
            encoding="utf-8",
        )
        vocab = tmp_path / "vocab.txt"
        vocab.write_text("a\nb\n", encoding="utf-8")
        code = main(["evaluate", "--records", str(records), "--vocab", str(vocab)])
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["ser"] == 0.0 and report["neo"] == 0.0 and report["bp"] == 1.0


class TestBatch:
    def _manifest(self, tmp_path, workspace, n=3):
        _, dag_path, table_path, table = workspace
        cons = write_constraints(tmp_path, [{"phrases": [phrase_surface(table, (1,))]}])
        entries = []
        for i in range(n):
            entries.append({
                "dag": dag_path, "table": table_path,
                "mode": "hlc" if i % 2 else "wfsa-shortest",
                "constraints": cons if i % 2 else None,
                "references": ["w001 w004 w006"],
            })
        # drop null constraint keys so defaults apply cleanly
        entries = [{k: v for k, v in e.items() if v is not None} for e in entries]
        path = tmp_path / "manifest.jsonl"
        path.write_text("".join(json.dumps(e) + "\n" for e in entries), encoding="utf-8")
        return str(path)

    def test_three_jobs_three_lines_plus_summary(self, workspace, tmp_path):
        manifest = self._manifest(tmp_path, workspace)
        out = tmp_path / "batch.jsonl"
        code = main(["batch", "--manifest", manifest, "--ke", "2", "--kt", "2",
                     "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        summary = json.loads(lines[-1])["summary"]
        assert summary["jobs"] == 3
        assert summary["decoded"] == 3
        assert summary["metrics"]["ser"] == 0.0

    def test_parallel_matches_sequential(self, workspace, tmp_path):
        manifest = self._manifest(tmp_path, workspace, n=6)
        out1 = tmp_path / "seq.jsonl"
        out4 = tmp_path / "par.jsonl"
        assert main(["batch", "--manifest", manifest, "--ke", "2", "--kt", "2",
                     "--parallel", "1", "--out", str(out1)]) == EXIT_OK
        assert main(["batch", "--manifest", manifest, "--ke", "2", "--kt", "2",
                     "--parallel", "4", "--out", str(out4)]) == EXIT_OK

        def normalize(text):
            docs = [json.loads(l) for l in text.splitlines()]
            for d in docs:
                d.pop("wall_time_s", None)
            return docs

        assert normalize(out1.read_text()) == normalize(out4.read_text())

    def test_job_failure_recorded_batch_continues(self, workspace, tmp_path):
        _, dag_path, table_path, _ = workspace
        entries = [
            {"dag": str(tmp_path / "nope.json"), "table": table_path, "mode": "greedy"},
            {"dag": dag_path, "table": table_path, "mode": "greedy"},
        ]
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("".join(json.dumps(e) + "\n" for e in entries), encoding="utf-8")
        out = tmp_path / "out.jsonl"
        assert main(["batch", "--manifest", str(manifest), "--out", str(out)]) == EXIT_OK
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert lines[0]["status"] == "error"
        assert lines[1]["status"] == "ok"
        assert lines[2]["summary"]["errors"] == 1


class TestDeterminismAndSummary:
    def test_decode_bit_identical_modulo_wall_time(self, workspace):
        _, dag_path, table_path, _ = workspace
        job = DecodeJob(dag_path=dag_path, table_path=table_path,
                        mode="wfsa-shortest", k_e=2, k_t=2)
        a = run_decode(job).to_dict()
        b = run_decode(job).to_dict()
        a.pop("wall_time_s"), b.pop("wall_time_s")
        assert a == b

    def test_len_upper_flag_caps_output(self, workspace, tmp_path):
        _, dag_path, table_path, _ = workspace
        out = tmp_path / "lc.jsonl"
        code = main(["decode", "--dag", dag_path, "--table", table_path,
                     "--mode", "lc", "--target-len", "3", "--len-upper", "2",
                     "--ke", "2", "--kt", "2", "--edge-prune-p", "1.0",
                     "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["status"] == "ok"
        assert len(doc["tokens"]) <= 2

    def test_batch_summary_matches_direct_metrics(self, workspace, tmp_path):
        from dagdec.metrics import EvalRecord, build_eval_vocabulary, compute_report

        _, dag_path, table_path, table = workspace
        # required phrases that unconstrained decoding will often miss
        cons = write_constraints(
            tmp_path, [{"phrases": [phrase_surface(table, (1, 3)), "w009"]}]
        )
        lex = write_lexicon(tmp_path, [f"w{i:03d}" for i in range(8)])
        entries = [
            {"dag": dag_path, "table": table_path, "mode": "wfsa-shortest",
             "constraints": cons, "lexicon": lex, "references": ["w001 w002 w003"]}
            for _ in range(4)
        ]
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("".join(json.dumps(e) + "\n" for e in entries),
                            encoding="utf-8")
        out = tmp_path / "b.jsonl"
        assert main(["batch", "--manifest", str(manifest), "--ke", "2", "--kt", "2",
                     "--out", str(out)]) == EXIT_OK
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        summary = lines[-1]["summary"]

        phrases = [phrase_surface(table, (1, 3)), "w009"]
        records = [
            EvalRecord(output=d["text"], required_values=tuple(phrases),
                       references=("w001 w002 w003",))
            for d in lines[:-1]
        ]
        words = set(w for p in phrases for w in p.split())
        words.update(f"w{i:03d}" for i in range(8))
        direct = compute_report(records, build_eval_vocabulary(extra_words=words))
        assert summary["metrics"] == direct
        assert direct["ser"] > 0.0  # the cross-check must not be vacuous


class TestConstraintFileHandling:
    def test_constraint_line_out_of_range(self, workspace, tmp_path):
        _, dag_path, table_path, _ = workspace
        cons = write_constraints(tmp_path, [{"phrases": ["w001"]}])
        job = DecodeJob(dag_path=dag_path, table_path=table_path, mode="hlc",
                        constraints_path=cons, constraint_line=5, k_e=2, k_t=2)
        with pytest.raises(ValueError, match="out of range"):
            run_decode(job)

    def test_constraint_line_selects_entry(self, workspace, tmp_path):
        _, dag_path, table_path, table = workspace
        cons = write_constraints(tmp_path, [
            {"phrases": [phrase_surface(table, (9, 9))]},  # infeasible
            {"phrases": [phrase_surface(table, (1,))]},    # feasible
        ])
        job = DecodeJob(dag_path=dag_path, table_path=table_path, mode="hlc",
                        constraints_path=cons, constraint_line=1, k_e=2, k_t=2)
        got = run_decode(job)
        assert got.status == "ok"
        assert got.constraints_met == (True,)
