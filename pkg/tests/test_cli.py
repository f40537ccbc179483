import hashlib

import pytest

from tellipsoid.cli import main
from tellipsoid.ranking import read_ranked_list

from conftest import FIXTURES

EXPR = str(FIXTURES / "small_expression.tsv")
LABELS = str(FIXTURES / "small_labels.tsv")
TRUTH = str(FIXTURES / "small_truth.tsv")

GAUSS = ["--m", "1000", "--blocksize", "20", "--rho", "0.5", "--mu", "20", "--md", "20",
         "--xu", "1", "--xd", "-1", "--n1", "10", "--n2", "10"]


def _digest(*paths):
    return [hashlib.sha256(open(p, "rb").read()).hexdigest() for p in paths]


class TestRank:
    def test_three_hundred_rows(self, tmp_path):
        assert main(["simulate", *GAUSS, "--seed", "1", "--outdir", str(tmp_path)]) == 0
        out = tmp_path / "list.tsv"
        rc = main(["rank", "--input", str(tmp_path / "expression.tsv"),
                   "--labels", str(tmp_path / "labels.tsv"), "--R", "300", "--output", str(out)])
        assert rc == 0
        ranked = read_ranked_list(out)
        assert len(ranked) == 300
        assert ranked.metadata["P"] == 50 and ranked.metadata["c"] == 500
        assert ranked.metadata["delta"] == 1e-10

    def test_stdout(self, capsys):
        assert main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "5"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "rank\tgene_id\tu_star\tt\tt_rank" and len(out) == 6 + 5

    def test_P_out_of_range(self, capsys):
        assert main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "5", "--P", "120"]) == 1
        assert "P out of range" in capsys.readouterr().err

    def test_solvers_order_genes_alike(self, tmp_path):
        paths = {}
        for solver in ("dense", "lowrank"):
            paths[solver] = tmp_path / f"{solver}.tsv"
            assert main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "100",
                         "--solver", solver, "--output", str(paths[solver])]) == 0
        dense, low = (read_ranked_list(paths[s]) for s in ("dense", "lowrank"))
        assert dense.gene_ids == low.gene_ids
        assert dense.metadata["method"] == "dense-cholesky"
        assert low.metadata["method"] == "lowrank-woodbury"

    def test_R_too_large(self, capsys):
        assert main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "150"]) == 1
        assert "R out of range" in capsys.readouterr().err

    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["rank", "--input", str(tmp_path / "nope.tsv"), "--labels", LABELS,
                     "--R", "5"]) == 2

    def test_unwritable_output(self, tmp_path):
        assert main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "5",
                     "--output", str(tmp_path / "no" / "dir" / "l.tsv")]) == 2

    def test_bad_labels_are_validation_errors(self, tmp_path, capsys):
        bad = tmp_path / "y.tsv"
        bad.write_text("s01\t1\ns02\t3\n")
        assert main(["rank", "--input", EXPR, "--labels", str(bad), "--R", "5"]) == 1
        assert "not 1 or 2" in capsys.readouterr().err

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["rank", "--input", EXPR])
        assert info.value.code == 1

    def test_threads_and_inputs_untouched(self, tmp_path):
        before = _digest(EXPR, LABELS)
        assert main(["--threads", "1", "rank", "--input", EXPR, "--labels", LABELS, "--R", "10",
                     "--output", str(tmp_path / "l.tsv")]) == 0
        assert _digest(EXPR, LABELS) == before
        assert main(["--threads", "0", "rank", "--input", EXPR, "--labels", LABELS,
                     "--R", "10"]) == 1


class TestSimulate:
    def test_gaussian_paper_scale(self, tmp_path):
        args = ["simulate", "--mode", "gaussian", "--m", "3226", "--blocksize", "20", "--rho", "0.8",
                "--mu", "50", "--md", "50", "--xu", "1", "--xd", "-1", "--n1", "10", "--n2", "10",
                "--seed", "4", "--outdir", str(tmp_path)]
        assert main(args) == 0
        lines = (tmp_path / "expression.tsv").read_text().splitlines()
        assert len(lines) == 3227 and len(lines[0].split("\t")) == 21
        truth = (tmp_path / "truth.tsv").read_text()
        assert "# seed=4" in truth and "# rho=0.8" in truth and "# m_u=50" in truth

    def test_case_2b_surrogate(self, tmp_path):
        src = tmp_path / "src"
        assert main(["simulate", "--m", "2500", "--blocksize", "25", "--rho", "0.3", "--mu", "1",
                     "--md", "1", "--xu", "1", "--xd", "-1", "--n1", "25", "--n2", "27",
                     "--seed", "0", "--outdir", str(src)]) == 0
        before = _digest(src / "expression.tsv", src / "labels.tsv")
        out = tmp_path / "out"
        assert main(["simulate", "--mode", "standardize", "--input", str(src / "expression.tsv"),
                     "--labels", str(src / "labels.tsv"), "--mu", "600", "--md", "600",
                     "--xu", "0.1", "--xd", "-0.1", "--n1", "20", "--n2", "20", "--seed", "5",
                     "--outdir", str(out)]) == 0
        assert _digest(src / "expression.tsv", src / "labels.tsv") == before
        rows = (out / "truth.tsv").read_text().splitlines()
        dirs = [r.split("\t")[1] for r in rows if not r.startswith("#")][1:]
        assert dirs.count("up") == 600 and dirs.count("down") == 600
        header = (out / "expression.tsv").read_text().splitlines()[0].split("\t")
        assert len(header) == 41

    def test_identical_reruns(self, tmp_path):
        for d in ("a", "b"):
            assert main(["simulate", *GAUSS, "--seed", "3", "--outdir", str(tmp_path / d)]) == 0
        for f in ("expression.tsv", "labels.tsv", "truth.tsv"):
            assert _digest(tmp_path / "a" / f) == _digest(tmp_path / "b" / f)

    def test_seed_required(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["simulate", *GAUSS, "--outdir", str(tmp_path)])
        assert info.value.code == 1

    @pytest.mark.parametrize("change", [("--xu", "0"), ("--rho", "1.2"), ("--n1", "1")])
    def test_invalid_spec(self, tmp_path, change):
        args = list(GAUSS)
        args[args.index(change[0]) + 1] = change[1]
        assert main(["simulate", *args, "--seed", "1", "--outdir", str(tmp_path)]) == 1

    def test_mode_consistency(self, tmp_path, capsys):
        assert main(["simulate", "--mode", "standardize", *GAUSS[6:], "--seed", "1",
                     "--outdir", str(tmp_path)]) == 1
        assert "--input" in capsys.readouterr().err


class TestEvaluate:
    def test_single_list(self, tmp_path):
        lst = tmp_path / "l.tsv"
        main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "30", "--output", str(lst)])
        out = tmp_path / "report.tsv"
        assert main(["evaluate", "--list", str(lst), "--truth", TRUTH, "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "method\tR\tNoFP\tFDR" and len(lines) == 2
        method, R, nofp, fdr = lines[1].split("\t")
        assert R == "30" and float(fdr) == pytest.approx(int(nofp) / 30)

    def test_study(self, tmp_path):
        out, summary = tmp_path / "study.tsv", tmp_path / "summary.tsv"
        assert main(["evaluate", "--study", "--mode", "standardize", "--input", EXPR,
                     "--labels", LABELS, "--mu", "10", "--md", "5", "--xu", "1.5", "--xd", "-1.5",
                     "--n1", "10", "--n2", "10", "--replicates", "40", "--R", "50", "--seed", "2",
                     "--output", str(out), "--summary", str(summary)]) == 0
        rows = [r.split("\t") for r in out.read_text().splitlines()[1:]]
        assert sum(r[1] == "tellipsoid" for r in rows) == 40
        assert sum(r[1] == "raw_t" for r in rows) == 40
        assert len(summary.read_text().splitlines()) == 3

    def test_study_needs_seed(self, capsys):
        assert main(["evaluate", "--study", *GAUSS, "--replicates", "1"]) == 1
        assert "--seed" in capsys.readouterr().err

    def test_truth_missing_gene(self, tmp_path, capsys):
        lst = tmp_path / "l.tsv"
        main(["rank", "--input", EXPR, "--labels", LABELS, "--R", "30", "--output", str(lst)])
        first = read_ranked_list(lst).rows[0].gene_id
        lines = open(TRUTH).read().splitlines()
        truth = tmp_path / "t.tsv"
        truth.write_text("\n".join(l for l in lines if not l.startswith(first + "\t")) + "\n")
        assert main(["evaluate", "--list", str(lst), "--truth", str(truth)]) == 1
        assert repr(first) in capsys.readouterr().err

    def test_needs_inputs(self):
        assert main(["evaluate", "--truth", TRUTH]) == 1


class TestCovlab:
    def test_observation_one(self, capsys):
        rc = main(["covlab", "--obs", "1", "--rho", "0.5", "--n1", "25", "--n2", "25",
                   "--reps", "100000", "--tol", "0.03", "--seed", "0"])
        assert rc == 0
        assert "theoretical=0.521739" in capsys.readouterr().out

    def test_independent(self, capsys):
        assert main(["covlab", "--obs", "1", "--rho", "0", "--n1", "25", "--n2", "25",
                     "--reps", "20000", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert abs(float(out.split("empirical=")[1].split()[0])) < 0.03

    def test_out_of_tolerance(self):
        assert main(["covlab", "--obs", "3", "--rho1", "0.8", "--rho2", "0.2", "--n1", "25",
                     "--n2", "25", "--reps", "20000", "--seed", "0", "--tol", "0"]) == 3

    @pytest.mark.parametrize("extra", [["--rho", "1.5"], ["--rho1", "0.5"],
                                       ["--rho", "0.5", "--rho1", "0.5"], ["--rho", "0.1", "--tol", "-1"]])
    def test_invalid(self, extra):
        assert main(["covlab", "--obs", "1", "--n1", "25", "--n2", "25", "--reps", "20000",
                     "--seed", "0", *extra]) == 1

    def test_seed_required(self):
        with pytest.raises(SystemExit) as info:
            main(["covlab", "--obs", "1", "--rho", "0.1", "--n1", "5", "--n2", "5"])
        assert info.value.code == 1
