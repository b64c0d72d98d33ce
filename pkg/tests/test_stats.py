"""Rank statistics, critical-difference machinery, and report CSV formats."""

import numpy as np
import pytest
import scipy.stats

from lamper.errors import LamperError
from lamper.stats import (
    Q_ALPHA_05,
    AccuracyMatrix,
    RankReport,
    average_ranks,
    cd_cliques,
    compute_report,
    friedman_statistic,
    nemenyi_cd,
    rank_column,
    read_per_dataset_csv,
    render_cd_diagram,
    write_per_dataset_csv,
    write_summary_csv,
)


def matrix(values, mask=None, methods=None, datasets=None):
    values = np.asarray(values, dtype=float)
    k, n = values.shape
    methods = tuple(methods or (f"M{i}" for i in range(k)))
    datasets = tuple(datasets or (f"D{j}" for j in range(n)))
    if mask is None:
        mask = np.zeros_like(values, dtype=bool)
    return AccuracyMatrix(methods, datasets, values, np.asarray(mask, dtype=bool))


class TestAccuracyMatrix:
    def test_validation(self):
        with pytest.raises(LamperError):
            matrix(np.zeros((1, 3)))  # needs k >= 2
        with pytest.raises(LamperError):
            matrix(np.zeros((2, 0)))
        with pytest.raises(LamperError):
            matrix([[0.5, 1.2], [0.1, 0.2]])  # accuracy above 1
        with pytest.raises(LamperError):
            matrix([[0.5, np.nan], [0.1, 0.2]])
        with pytest.raises(LamperError):
            matrix(np.zeros((2, 2)), methods=("A", "A"))

    def test_masked_cells_may_be_nan(self):
        m = matrix([[0.5, np.nan], [0.1, 0.2]], mask=[[False, True], [False, False]])
        assert m.complete_datasets().tolist() == [True, False]
        assert m.skipped_datasets() == ("D1",)

    def test_values_read_only(self):
        m = matrix([[0.5, 0.6], [0.1, 0.2]])
        with pytest.raises(ValueError):
            m.values[0, 0] = 0.9


class TestRankColumn:
    def test_highest_accuracy_gets_rank_one(self):
        assert rank_column(np.array([0.5, 0.9, 0.7])).tolist() == [3.0, 1.0, 2.0]

    def test_ties_average(self):
        assert rank_column(np.array([0.5, 0.7, 0.7])).tolist() == [3.0, 1.5, 1.5]
        assert rank_column(np.array([0.6, 0.6])).tolist() == [1.5, 1.5]

    def test_all_tied(self):
        assert rank_column(np.full(4, 0.3)).tolist() == [2.5, 2.5, 2.5, 2.5]

    def test_matches_scipy_rankdata(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            k = int(rng.integers(2, 9))
            col = rng.choice([0.1, 0.25, 0.5, 0.75, 0.9], k)
            expected = scipy.stats.rankdata(-col, method="average")
            assert np.array_equal(rank_column(col), expected)

    def test_rank_sum_invariant(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            k = int(rng.integers(2, 12))
            ranks = rank_column(rng.uniform(0, 1, k))
            assert abs(float(ranks.sum()) - k * (k + 1) / 2) < 1e-9


class TestAverageRanks:
    def test_spec_two_methods(self):
        ranks, n = average_ranks(matrix([[0.9, 0.8], [0.8, 0.9]]))
        assert ranks.tolist() == [1.5, 1.5]
        assert n == 2

    def test_three_methods_with_tie(self):
        ranks, _ = average_ranks(matrix([[0.5], [0.7], [0.7]]))
        assert ranks.tolist() == [3.0, 1.5, 1.5]

    def test_masked_dataset_dropped_entirely(self):
        m = matrix([[0.9, 0.1], [0.8, np.nan]], mask=[[False, False], [False, True]])
        ranks, n = average_ranks(m)
        assert n == 1
        assert ranks.tolist() == [1.0, 2.0]

    def test_no_complete_datasets_rejected(self):
        m = matrix([[np.nan], [0.5]], mask=[[True], [False]])
        with pytest.raises(LamperError):
            average_ranks(m)

    def test_mean_rank_centroid(self):
        # mean of per-method average ranks is always (k+1)/2
        rng = np.random.default_rng(29)
        for _ in range(50):
            k = int(rng.integers(2, 7))
            n = int(rng.integers(1, 9))
            ranks, _ = average_ranks(matrix(rng.uniform(0, 1, (k, n))))
            assert abs(float(ranks.mean()) - (k + 1) / 2) < 1e-9

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(31)
        vals = rng.uniform(0.2, 0.8, (4, 6))
        base, _ = average_ranks(matrix(vals))
        squashed, _ = average_ranks(matrix(vals ** 2))
        assert np.array_equal(base, squashed)


class TestFriedman:
    def test_hand_case(self):
        # k=2, N=10, ranks 1 and 2: 12*10/(2*3) * (1+4 - 2*9/4) = 10
        assert friedman_statistic(np.array([1.0, 2.0]), 2, 10) == pytest.approx(10.0)

    def test_all_tied_is_zero(self):
        assert friedman_statistic(np.array([2.0, 2.0, 2.0]), 3, 5) == pytest.approx(0.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(37)
        ranks, _ = average_ranks(matrix(rng.uniform(0, 1, (5, 8))))
        base = friedman_statistic(ranks, 5, 8)
        perm = rng.permutation(5)
        assert friedman_statistic(ranks[perm], 5, 8) == pytest.approx(base)

    def test_matches_scipy_on_distinct_columns(self):
        rng = np.random.default_rng(41)
        vals = rng.uniform(0, 1, (4, 12))
        ranks, n = average_ranks(matrix(vals))
        ours = friedman_statistic(ranks, 4, n)
        # scipy ranks per subject across methods; transpose to match
        expected = scipy.stats.friedmanchisquare(*vals).statistic
        assert ours == pytest.approx(expected, rel=1e-12)


class TestNemenyi:
    def test_reference_value(self):
        assert nemenyi_cd(5, 128) == pytest.approx(0.5392, abs=1e-3)

    def test_two_methods(self):
        assert nemenyi_cd(2, 100) == pytest.approx(0.196, abs=5e-4)

    def test_alpha_locked(self):
        with pytest.raises(LamperError):
            nemenyi_cd(5, 128, alpha=0.01)

    def test_k_range(self):
        with pytest.raises(LamperError):
            nemenyi_cd(1, 10)
        with pytest.raises(LamperError):
            nemenyi_cd(21, 10)

    def test_monotonicity(self):
        # wider with more methods, tighter with more datasets
        assert nemenyi_cd(6, 50) > nemenyi_cd(5, 50)
        assert nemenyi_cd(5, 100) < nemenyi_cd(5, 50)

    def test_q_table_against_scipy(self):
        for k, q in Q_ALPHA_05.items():
            ref = scipy.stats.studentized_range.ppf(0.95, k, np.inf) / np.sqrt(2)
            assert q == pytest.approx(ref, abs=5e-6)


class TestCliques:
    def test_spec_example(self):
        out = cd_cliques(np.array([1.0, 1.2, 3.0]), 0.5)
        assert out == [(0, 1), (2,)]

    def test_chain_overlap(self):
        # 1.0-1.4 and 1.4-1.8 overlap but 1.0-1.8 exceeds cd
        out = cd_cliques(np.array([1.0, 1.4, 1.8]), 0.5)
        assert out == [(0, 1), (1, 2)]

    def test_all_one_clique(self):
        assert cd_cliques(np.array([2.0, 2.1, 1.9]), 0.5) == [(2, 0, 1)]

    def test_contained_spans_pruned(self):
        out = cd_cliques(np.array([1.0, 1.1, 1.2, 3.0, 3.05]), 0.3)
        assert out == [(0, 1, 2), (3, 4)]

    def test_each_method_covered(self):
        rng = np.random.default_rng(43)
        for _ in range(100):
            k = int(rng.integers(2, 9))
            ranks = rng.uniform(1, k, k)
            cliques = cd_cliques(ranks, float(rng.uniform(0.1, 2.0)))
            covered = set()
            for c in cliques:
                covered.update(c)
            assert covered == set(range(k))

    def test_members_ordered_by_rank(self):
        out = cd_cliques(np.array([2.0, 1.0, 2.2]), 0.4)
        assert out == [(1,), (0, 2)]


class TestComputeReport:
    def test_fields(self):
        m = matrix([[0.9, 0.7, 0.8], [0.6, 0.5, 0.4]],
                   methods=("A", "B"), datasets=("d1", "d2", "d3"))
        rep = compute_report(m)
        assert rep.methods == ("A", "B")
        assert rep.average_rank == (1.0, 2.0)
        assert rep.n_datasets_ranked == 3
        assert rep.skipped == ()
        assert rep.average_accuracy == pytest.approx((0.8, 0.5))
        assert rep.cd == pytest.approx(nemenyi_cd(2, 3))

    def test_accuracy_averages_unmasked_even_for_skipped_datasets(self):
        m = matrix([[0.9, 0.5], [0.7, np.nan]], mask=[[False, False], [False, True]])
        rep = compute_report(m)
        assert rep.average_accuracy[0] == pytest.approx(0.7)
        assert rep.average_accuracy[1] == pytest.approx(0.7)
        assert rep.n_datasets_ranked == 1
        assert rep.skipped == ("D1",)


class TestSvg:
    def report(self, ranks, cd=0.5):
        k = len(ranks)
        return RankReport(methods=tuple(f"M{i}" for i in range(k)),
                          average_accuracy=tuple(0.5 for _ in ranks),
                          average_rank=tuple(ranks),
                          n_datasets_ranked=10, skipped=(), friedman=1.0,
                          cd=cd, cliques=tuple(cd_cliques(np.array(ranks), cd)))

    def test_deterministic_bytes(self):
        rep = self.report([1.0, 1.2, 3.0])
        assert render_cd_diagram(rep) == render_cd_diagram(rep)

    def test_clique_lines_only_for_size_two_plus(self):
        svg = render_cd_diagram(self.report([1.0, 1.2, 3.0]))
        assert svg.count('class="clique"') == 1
        none = render_cd_diagram(self.report([1.0, 2.0, 3.0, 4.0, 5.0], cd=0.54))
        assert none.count('class="clique"') == 0

    def test_structure(self):
        svg = render_cd_diagram(self.report([1.0, 1.2, 3.0]))
        assert svg.startswith('<?xml version="1.0"')
        assert "<svg xmlns=" in svg
        assert svg.rstrip().endswith("</svg>")
        assert svg.endswith("\n")
        assert "CD = 0.5000" in svg
        for name, rank in (("M0", "1.00"), ("M1", "1.20"), ("M2", "3.00")):
            assert f">{name} ({rank})<" in svg

    def test_label_escaping(self):
        rep = RankReport(methods=("A&B", "C<D"), average_accuracy=(0.5, 0.5),
                         average_rank=(1.0, 2.0), n_datasets_ranked=5, skipped=(),
                         friedman=1.0, cd=0.3, cliques=((0,), (1,)))
        svg = render_cd_diagram(rep)
        assert "A&amp;B" in svg
        assert "C&lt;D" in svg
        assert "A&B" not in svg


class TestCsv:
    def test_summary_format(self, tmp_path):
        m = matrix([[0.9, 0.7], [0.6, 0.5]], methods=("A", "B"))
        rep = compute_report(m)
        path = tmp_path / "summary.csv"
        write_summary_csv(path, rep)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,average_accuracy,average_rank"
        assert lines[1] == "A,0.800000,1.000000"
        assert lines[2] == "B,0.550000,2.000000"

    def test_summary_method_filter(self, tmp_path):
        m = matrix([[0.9, 0.7], [0.6, 0.5], [0.4, 0.3]], methods=("A", "B", "C"))
        rep = compute_report(m)
        path = tmp_path / "ablation.csv"
        write_summary_csv(path, rep, method_filter=("B",))
        lines = path.read_text().splitlines()
        assert lines == ["method,average_accuracy,average_rank",
                         "B,0.550000,2.000000"]

    def test_per_dataset_round_trip(self, tmp_path):
        m = matrix([[0.912345, 0.5], [0.7, np.nan]],
                   mask=[[False, False], [False, True]],
                   methods=("A", "B"), datasets=("d1", "d2"))
        path = tmp_path / "per_dataset.csv"
        write_per_dataset_csv(path, m)
        text = path.read_text()
        assert text.splitlines()[0] == "dataset,A,B,skipped"
        assert "# skipped datasets: d2" in text
        again = read_per_dataset_csv(path)
        assert again.methods == ("A", "B")
        assert again.datasets == ("d1", "d2")
        assert np.array_equal(again.mask, m.mask)
        assert again.values[0, 0] == pytest.approx(0.912345, abs=1e-6)
        assert np.isnan(again.values[1, 1])

    def test_per_dataset_no_footer_without_skips(self, tmp_path):
        m = matrix([[0.9], [0.8]])
        path = tmp_path / "per_dataset.csv"
        write_per_dataset_csv(path, m)
        assert "#" not in path.read_text()

    def test_read_rejects_bad_flag(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("dataset,A,B,skipped\nd1,0.5,0.6,maybe\n")
        with pytest.raises(LamperError):
            read_per_dataset_csv(path)

    def test_read_rejects_arity_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("dataset,A,B,skipped\nd1,0.5,no\n")
        with pytest.raises(LamperError):
            read_per_dataset_csv(path)

    def test_read_rejects_inconsistent_flag(self, tmp_path):
        # flag says yes but every cell is present
        path = tmp_path / "bad.csv"
        path.write_text("dataset,A,B,skipped\nd1,0.5,0.6,yes\n")
        with pytest.raises(LamperError):
            read_per_dataset_csv(path)
