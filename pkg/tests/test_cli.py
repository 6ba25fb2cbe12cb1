import numpy as np
import pytest

from ivfbalance.cli import main
from ivfbalance import load_fvecs


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def generated(tmp_path):
    db = tmp_path / "db.fvecs"
    queries = tmp_path / "q.fvecs"
    assert run(["gen", "--out", db, "--seed", 3, "--n", 800, "--dim", 6,
                "--modes", 2, "--weights", "0.8,0.2", "--spread", 0.1]) == 0
    assert run(["gen", "--out", queries, "--seed", 33, "--n", 50, "--dim", 6,
                "--modes", 2, "--weights", "0.8,0.2", "--spread", 0.1,
                "--centers-seed", 3]) == 0
    return db, queries


class TestPipeline:
    def test_end_to_end(self, generated, tmp_path, capsys):
        db, queries = generated
        cb_dir = tmp_path / "cb"
        bal_dir = tmp_path / "bal"
        idx_dir = tmp_path / "idx"
        assert run(["kmeans", "--db", db, "--k", 8, "--seed", 1, "--out", cb_dir]) == 0
        assert (cb_dir / "centroids.fvecs").is_file()
        meta = (cb_dir / "meta.txt").read_text()
        assert "distortion=" in meta and "seed=1" in meta

        assert run(["balance", "--db", db, "--codebook", cb_dir, "--iters", 32,
                    "--out", bal_dir]) == 0
        assert (bal_dir / "trace.csv").is_file()
        assert (bal_dir / "penalties.txt").is_file()

        assert run(["build", "--db", db, "--codebook", bal_dir, "--out", idx_dir]) == 0
        assert (idx_dir / "lists.bin").is_file()

        assert run(["search", "--index", idx_dir, "--db", db, "--queries", queries,
                    "--ma", 3, "--r", 5, "--out", tmp_path / "hits.csv"]) == 0
        lines = (tmp_path / "hits.csv").read_text().splitlines()
        assert lines[0] == "query,rank,id,dist"
        assert len(lines) == 1 + 50 * 5

        assert run(["eval", "--index", idx_dir, "--db", db, "--queries", queries,
                    "--ma", 2, "--out", tmp_path / "eval"]) == 0
        report = (tmp_path / "eval" / "report.csv").read_text().splitlines()
        assert report[0].startswith("k,ma,iters")

    def test_gen_deterministic(self, tmp_path):
        a = tmp_path / "a.fvecs"
        b = tmp_path / "b.fvecs"
        for out in (a, b):
            assert run(["gen", "--out", out, "--seed", 5, "--n", 100, "--dim", 3]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert load_fvecs(a).count == 100

    def test_balance_target_gamma(self, generated, tmp_path):
        db, _ = generated
        cb_dir = tmp_path / "cb"
        bal_dir = tmp_path / "bal"
        assert run(["kmeans", "--db", db, "--k", 8, "--seed", 1, "--out", cb_dir]) == 0
        assert run(["balance", "--db", db, "--codebook", cb_dir,
                    "--target-gamma", 1.5, "--out", bal_dir]) == 0
        meta = (bal_dir / "meta.txt").read_text()
        assert "stop=target_gamma(1.5)" in meta


class TestExperimentCommands:
    def test_convergence_and_histogram(self, generated, tmp_path):
        db, queries = generated
        out = tmp_path / "exp"
        assert run(["convergence", "--db", db, "--k", "4,8", "--iters", "0,8",
                    "--seed", 2, "--out", out]) == 0
        assert (out / "convergence_k4.csv").is_file()
        assert (out / "convergence_k8.csv").is_file()

        assert run(["histogram", "--db", db, "--queries", queries, "--k", "4",
                    "--ma", "1", "--iters", "0,8", "--seed", 2, "--out", out]) == 0
        assert (out / "histogram_k4_ma1_r8.csv").is_file()
        assert (out / "histogram_summary.csv").is_file()

    def test_tradeoff(self, generated, tmp_path):
        db, queries = generated
        out = tmp_path / "exp"
        assert run(["tradeoff", "--db", db, "--queries", queries, "--k", "4",
                    "--ma", "1,4", "--iters", "0,8", "--seed", 2, "--out", out]) == 0
        lines = (out / "tradeoff.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 2

    def test_tradeoff_plain_route(self, generated, tmp_path):
        db, queries = generated
        out = tmp_path / "plain"
        assert run(["tradeoff", "--db", db, "--queries", queries, "--k", "4",
                    "--ma", "1", "--iters", "0,8", "--seed", 2, "--out", out,
                    "--route", "plain"]) == 0
        assert (out / "tradeoff.csv").is_file()


class TestExitCodes:
    def test_missing_file_is_validation_error(self, tmp_path):
        assert run(["kmeans", "--db", tmp_path / "missing.fvecs", "--k", 2,
                    "--out", tmp_path / "cb"]) == 2

    def test_bad_k_is_validation_error(self, generated, tmp_path):
        db, _ = generated
        assert run(["kmeans", "--db", db, "--k", 100000, "--out", tmp_path / "cb"]) == 2

    def test_bad_target_gamma(self, generated, tmp_path):
        db, _ = generated
        cb_dir = tmp_path / "cb"
        run(["kmeans", "--db", db, "--k", 4, "--out", cb_dir])
        assert run(["balance", "--db", db, "--codebook", cb_dir,
                    "--target-gamma", 0.5, "--out", tmp_path / "bal"]) == 2

    def test_unknown_flag_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--nope"])
        assert exc.value.code == 2
