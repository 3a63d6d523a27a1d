import math
import random

import pytest
from scipy.stats import kendalltau as scipy_kendalltau

from clair_eval.core import Caption, GroupSample, PairSample
from clair_eval.stats import (
    DegenerateInputError,
    group_correlation,
    kendall_tau,
    pairwise_accuracy,
    pearson,
    rank_average,
    spearman,
    system_level,
)


def brute_tau_b(x, y):
    """Independent O(n^2) pair-counting oracle with tie corrections."""
    n = len(x)
    concordant = discordant = 0
    tied_only_x = tied_only_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tied_only_x += 1
            elif dy == 0:
                tied_only_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    denom_x = concordant + discordant + tied_only_x
    denom_y = concordant + discordant + tied_only_y
    return (concordant - discordant) / math.sqrt(denom_x * denom_y)


def random_vectors(rng, with_ties):
    n = rng.randrange(9, 51)
    if with_ties:
        x = [float(rng.randrange(6)) for _ in range(n)]
        y = [float(rng.randrange(6)) for _ in range(n)]
    else:
        x = rng.sample(range(1000), n)
        y = rng.sample(range(1000), n)
        x = [float(v) for v in x]
        y = [float(v) for v in y]
    if min(x) == max(x):
        x[0] += 1.0
    if min(y) == max(y):
        y[0] += 1.0
    return x, y


class TestKendall:
    def test_perfect_concordance(self):
        assert kendall_tau([1, 2, 3], [1, 2, 3]).value == pytest.approx(1.0)

    def test_perfect_discordance(self):
        assert kendall_tau([1, 2, 3], [3, 2, 1]).value == pytest.approx(-1.0)

    def test_tied_hand_case(self):
        result = kendall_tau([1, 2, 2, 3], [1, 3, 2, 2], variant="b")
        # Brute-forced over all 6 pairs: C=3, D=1, tied-x-only=1, tied-y-only=1.
        expected = (3 - 1) / math.sqrt((3 + 1 + 1) * (3 + 1 + 1))
        assert result.value == pytest.approx(expected, abs=1e-12)
        assert result.value == pytest.approx(brute_tau_b([1, 2, 2, 3], [1, 3, 2, 2]))

    def test_against_brute_force_oracle(self):
        rng = random.Random(23)
        for case in range(100):
            x, y = random_vectors(rng, with_ties=case % 2 == 0)
            result = kendall_tau(x, y, variant="b")
            assert result.value == pytest.approx(brute_tau_b(x, y), abs=1e-12)

    def test_against_scipy(self):
        rng = random.Random(29)
        for case in range(30):
            x, y = random_vectors(rng, with_ties=case % 2 == 0)
            expected = scipy_kendalltau(x, y, variant="b").statistic
            assert kendall_tau(x, y, variant="b").value == pytest.approx(expected, abs=1e-12)
            expected_c = scipy_kendalltau(x, y, variant="c").statistic
            assert kendall_tau(x, y, variant="c").value == pytest.approx(expected_c, abs=1e-12)

    def test_symmetry(self):
        x = [1.0, 3.0, 2.0, 2.0, 5.0, 4.0, 7.0, 6.0, 9.0, 8.0]
        y = [2.0, 1.0, 4.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0, 9.0]
        assert kendall_tau(x, y).value == pytest.approx(kendall_tau(y, x).value)

    def test_monotone_transform_invariance(self):
        rng = random.Random(31)
        x, y = random_vectors(rng, with_ties=True)
        base = kendall_tau(x, y).value
        transformed = [math.exp(0.1 * v) + v**3 for v in x]
        assert kendall_tau(transformed, y).value == pytest.approx(base, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            kendall_tau([1, 1, 1], [1, 2, 3])

    def test_exact_permutation_p_small_n(self):
        result = kendall_tau([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
        # Perfect concordance: only the 2 extreme orderings of 5! reach |tau|=1.
        assert result.p_value == pytest.approx(2 / 120)

    def test_normal_p_large_n(self):
        rng = random.Random(37)
        x, y = random_vectors(rng, with_ties=False)
        result = kendall_tau(x, y)
        assert 0.0 <= result.p_value <= 1.0


class TestPearsonSpearman:
    def test_exact_linearity(self):
        assert pearson([1, 2, 3], [2, 4, 6]).value == pytest.approx(1.0)

    def test_spearman_hand_case(self):
        assert spearman([1, 2, 3], [1, 3, 2]).value == pytest.approx(0.5)

    def test_spearman_equals_pearson_of_ranks(self):
        rng = random.Random(41)
        for _ in range(50):
            x, y = random_vectors(rng, with_ties=True)
            expected = pearson(rank_average(x), rank_average(y)).value
            assert spearman(x, y).value == pytest.approx(expected, abs=1e-12)

    def test_spearman_monotone_invariance(self):
        rng = random.Random(43)
        x, y = random_vectors(rng, with_ties=True)
        base = spearman(x, y).value
        transformed = [3.0 * v + math.atan(v) for v in x]
        assert spearman(transformed, y).value == pytest.approx(base, abs=1e-12)

    def test_symmetry(self):
        x = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 3.0, 9.0, 6.0, 0.0]
        y = [2.0, 3.0, 1.0, 7.0, 8.0, 5.0, 4.0, 6.0, 9.0, 1.5]
        assert pearson(x, y).value == pytest.approx(pearson(y, x).value)
        assert spearman(x, y).value == pytest.approx(spearman(y, x).value)

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            pearson([2, 2, 2], [1, 2, 3])
        with pytest.raises(DegenerateInputError):
            spearman([1, 2, 3], [5, 5, 5])

    def test_values_in_range(self):
        rng = random.Random(47)
        for _ in range(20):
            x, y = random_vectors(rng, with_ties=False)
            for result in (pearson(x, y), spearman(x, y)):
                assert -1.0 <= result.value <= 1.0
                assert 0.0 <= result.p_value <= 1.0


def make_pairs(categories, choices):
    refs = (Caption("a dog runs"),)
    return [
        PairSample(
            id=f"p{i}", references=refs, caption_a=Caption("a"),
            caption_b=Caption("b"), category=cat, human_choice=choice,
        )
        for i, (cat, choice) in enumerate(zip(categories, choices))
    ]


class TestPairwiseAccuracy:
    def test_basic_with_tie(self):
        pairs = make_pairs(["HC"] * 4, ["A", "A", "B", "A"])
        # Scores agree with humans on 3 pairs; the last is an exact tie.
        score_a = [2.0, 5.0, 1.0, 3.0]
        score_b = [1.0, 2.0, 4.0, 3.0]
        acc = pairwise_accuracy(pairs, score_a, score_b)
        assert acc.per_category["HC"] == pytest.approx((3 + 0.5) / 4)
        assert acc.overall == pytest.approx(0.875)

    def test_all_ties(self):
        pairs = make_pairs(["HC", "HI", "HM", "MM"], ["A", "B", "A", "B"])
        acc = pairwise_accuracy(pairs, [1.0] * 4, [1.0] * 4)
        assert all(v == 0.5 for v in acc.per_category.values())
        assert acc.overall == pytest.approx(0.5)

    def test_tie_policy_wrong(self):
        pairs = make_pairs(["HC"], ["A"])
        acc = pairwise_accuracy(pairs, [1.0], [1.0], tie_policy="wrong")
        assert acc.overall == 0.0

    def test_overall_is_unweighted_category_mean(self):
        # Published convention check: (51.20 + 95.70 + 91.20 + 58.20) / 4 = 74.08.
        assert (51.20 + 95.70 + 91.20 + 58.20) / 4 == pytest.approx(74.075, abs=1e-9)
        pairs = make_pairs(
            ["HC", "HC", "HC", "HI"], ["A", "A", "A", "A"]
        )
        acc = pairwise_accuracy(pairs, [1, 1, 0, 1], [0, 0, 1, 0])
        # HC accuracy 2/3, HI accuracy 1; unweighted mean ignores counts.
        assert acc.overall == pytest.approx((2 / 3 + 1.0) / 2)

    def test_monotone_transform_invariance(self):
        pairs = make_pairs(["HC", "HI", "HM", "MM"], ["A", "B", "A", "B"])
        score_a = [0.2, 0.5, 0.5, 0.9]
        score_b = [0.1, 0.8, 0.5, 0.3]
        base = pairwise_accuracy(pairs, score_a, score_b)
        fn = lambda v: 100 * v**3 + 7
        mapped = pairwise_accuracy(
            pairs, [fn(v) for v in score_a], [fn(v) for v in score_b]
        )
        assert base == mapped


class TestSystemLevel:
    def five_system_fixture(self, swap=False):
        tags, metric, human = [], [], []
        metric_means = [0.1, 0.3, 0.5, 0.7, 0.9]
        human_means = [1.0, 2.0, 3.0, 4.0, 5.0]
        if swap:
            human_means[0], human_means[1] = human_means[1], human_means[0]
        for s in range(5):
            for k in range(4):
                tags.append(f"sys{s}")
                metric.append(metric_means[s] + 0.01 * (k - 1.5))
                human.append(human_means[s] + 0.1 * (k - 1.5))
        return tags, metric, human

    def test_identical_ranking(self):
        results = system_level(*self.five_system_fixture())
        assert results["tau"].value == pytest.approx(1.0)
        assert results["spearman"].value == pytest.approx(1.0)
        assert results["tau"].n == 5

    def test_reversed_two_systems(self):
        results = system_level(
            ["a", "a", "b", "b"], [1.0, 2.0, 3.0, 4.0], [9.0, 8.0, 2.0, 1.0]
        )
        assert results["tau"].value == pytest.approx(-1.0)

    def test_one_adjacent_swap(self):
        results = system_level(*self.five_system_fixture(swap=True))
        # Brute force over the 10 system pairs: 9 concordant, 1 discordant.
        assert results["tau"].value == pytest.approx(0.8)

    def test_exact_permutation_p_value(self):
        results = system_level(*self.five_system_fixture())
        assert results["tau"].p_value == pytest.approx(2 / 120)

    def test_needs_two_systems(self):
        with pytest.raises(ValueError):
            system_level(["a", "a"], [1.0, 2.0], [1.0, 2.0])


class TestGroupCorrelation:
    def make_groups(self, coverage, correctness):
        return [
            GroupSample(
                id=f"g{i}", candidates=(Caption("a"),), references=(Caption("b"),),
                coverage_rating=cov, correctness_rating=cor,
            )
            for i, (cov, cor) in enumerate(zip(coverage, correctness))
        ]

    def test_identical_metric(self):
        coverage = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
        correctness = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0, 10.0, 9.0]
        groups = self.make_groups(coverage, correctness)
        cov_result, cor_result = group_correlation(groups, coverage)
        assert cov_result.value == pytest.approx(1.0)
        assert abs(cor_result.value) < 1.0

    def test_independent_metric_near_zero(self):
        rng = random.Random(53)
        n = 40
        coverage = [float(rng.randrange(1, 6)) for _ in range(n)]
        correctness = [float(rng.randrange(1, 6)) for _ in range(n)]
        metric = [rng.random() for _ in range(n)]
        groups = self.make_groups(coverage, correctness)
        cov_result, _ = group_correlation(groups, metric)
        # Permutation band: |r| under independence is below ~3/sqrt(n) w.h.p.
        assert abs(cov_result.value) < 3.0 / math.sqrt(n)
