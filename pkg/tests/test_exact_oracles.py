import math
from fractions import Fraction

import pytest

from addcoal.exact_oracles import (
    borel_total_mass,
    block_config_count,
    borel_pmf,
    dp_sequence_distribution,
    enumerate_parking,
    enumerate_spanning_trees,
    p_mk,
    parking_final_merge_marginal,
    partition_dp,
)


def test_p_mk_examples():
    assert p_mk(2, 1) == 1
    assert p_mk(3, 2) == Fraction(2, 3)
    assert p_mk(3, 1) == Fraction(1, 3)


def test_p_mk_rows_sum_to_one_exactly():
    for m in range(2, 31):
        assert sum(p_mk(m, k) for k in range(1, m)) == 1


def test_p_mk_out_of_range():
    with pytest.raises(ValueError):
        p_mk(3, 0)
    with pytest.raises(ValueError):
        p_mk(3, 3)
    with pytest.raises(ValueError):
        p_mk(1, 1)


def test_p_mk_log_space_continuity():
    # float evaluation agrees with the rational one near the switchover
    for m in (28, 29, 30):
        for k in (1, m // 2, m - 1):
            exact = float(p_mk(m, k))
            logp = (
                math.lgamma(m - 1) - math.lgamma(k) - math.lgamma(m - k)
                + (k - 1) * math.log(k) + (m - k - 2) * math.log(m - k)
                - (m - 2) * math.log(m)
            )
            assert abs(exact - math.exp(logp)) < 1e-12


def test_borel_values():
    assert abs(borel_pmf(1) - math.exp(-1)) < 1e-15
    assert abs(borel_pmf(2) - math.exp(-2)) < 1e-15
    assert abs(borel_pmf(1) - 0.367879) < 5e-7


def test_borel_total_mass():
    # critical tail (~k^-3/2): plain truncation converges like 1/sqrt(K),
    # so unit mass needs the tail-corrected adaptive sum
    assert abs(borel_total_mass() - 1.0) < 1e-9
    plain = sum(borel_pmf(k) for k in range(1, 5000))
    assert 1e-3 < 1.0 - plain < 3e-2


def test_borel_is_p_mk_limit():
    worst = max(abs(p_mk(10_000, 10_000 - k) - borel_pmf(k)) for k in range(1, 11))
    assert worst < 1e-3


def test_enumerate_parking_small():
    d2 = enumerate_parking(2)
    assert d2.probs == {((1, 1, 1, 0),): Fraction(1)}
    d3 = enumerate_parking(3)
    assert d3.marginal(2, "L") == {1: Fraction(1, 3), 2: Fraction(2, 3)}
    assert sum(d3.probs.values()) == 1


def test_enumeration_caps():
    with pytest.raises(ValueError):
        enumerate_parking(9)
    with pytest.raises(ValueError):
        enumerate_spanning_trees(7)
    with pytest.raises(ValueError):
        partition_dp(21)
    with pytest.raises(ValueError):
        dp_sequence_distribution(8)


def test_enumerate_spanning_trees_small():
    d2 = enumerate_spanning_trees(2)
    assert d2.probs == {((1, 1, 1),): Fraction(1)}
    d3 = enumerate_spanning_trees(3)
    assert d3.marginal(2, "L") == {1: Fraction(1, 3), 2: Fraction(2, 3)}


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_three_way_equivalence(n):
    park = enumerate_parking(n).project(("s", "S", "L"))
    tree = enumerate_spanning_trees(n)
    chain = dp_sequence_distribution(n)
    assert park.tv_distance(tree) == 0
    assert park.tv_distance(chain) == 0
    assert tree.tv_distance(chain) == 0


def test_tv_distance_requires_same_fields():
    park = enumerate_parking(3)
    tree = enumerate_spanning_trees(3)
    with pytest.raises(ValueError):
        park.tv_distance(tree)


def test_conditional_size_biasedness():
    # P(L = x | merged pair {x, y}) = x / (x + y), by enumeration
    for n in (3, 4, 5):
        dist = enumerate_parking(n)
        for k in range(1, n):
            joint = dist.joint(k, ("s", "S", "L"))
            pair_mass = {}
            for (s, S, L), p in joint.items():
                pair_mass[(s, S)] = pair_mass.get((s, S), Fraction(0)) + p
            for (s, S, L), p in joint.items():
                assert p / pair_mass[(s, S)] == Fraction(
                    L, s + S
                ) or s == S  # equal sizes carry the whole pair mass at L = s
    # explicit n=3 step 2: merged pair is always {1, 2}
    d3 = enumerate_parking(3)
    assert d3.joint(2, ("s", "S")) == {(1, 2): Fraction(1)}


def test_final_merge_marginal_matches_p_mk():
    for m in range(2, 8):
        marginal = parking_final_merge_marginal(m)
        for k in range(1, m):
            assert marginal.get(k, Fraction(0)) == p_mk(m, k)


def test_partition_dp_expected_totals():
    dp = partition_dp(3)
    assert dp.expected_cumulative_cost("predator") == Fraction(8, 3)
    assert dp.expected_cumulative_cost("prey") == Fraction(7, 3)
    # per-step: step 1 merges two singletons, L = 1 always
    assert dp.expected_step_cost("predator", 1) == 1
    assert dp.expected_step_cost("predator", 2) == Fraction(5, 3)


def test_partition_dp_mass_and_final_state():
    for n in (4, 7, 12):
        dp = partition_dp(n)
        for step in dp.steps:
            assert sum(step.joint_sS.values()) == 1
            assert sum(step.joint_LR.values()) == 1
        assert dp.final == {(n,): Fraction(1)}


@pytest.mark.parametrize("n", [3, 5, 8])
def test_equation_rl(n):
    dp = partition_dp(n)
    for k in range(1, n):
        for l, val in dp.conditional_r_given_l(k).items():
            assert val == Fraction(n - l, n - k)


def test_l_marginal_is_size_biased():
    dp = partition_dp(4)
    step = dp.steps[1]  # k = 2
    marg = dp.l_marginal(2)
    expect = {}
    for (x, y), p in step.joint_sS.items():
        expect[x] = expect.get(x, Fraction(0)) + p * Fraction(x, x + y)
        expect[y] = expect.get(y, Fraction(0)) + p * Fraction(y, x + y)
    assert marg == expect


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@pytest.mark.parametrize("n", [2, 3, 5, 7])
def test_block_config_counts_complete(n):
    for k in range(1, n):
        total = sum(
            block_config_count(n, k, b) for b in _compositions(n, n - k + 1)
        )
        assert total == n**k


def test_block_config_count_edges():
    assert block_config_count(4, 2, (2, 1, 1)) > 0
    assert block_config_count(4, 2, (2, 2, 1)) == 0  # wrong total
    assert block_config_count(4, 2, (0, 2, 2)) == 0  # empty block
    with pytest.raises(ValueError):
        block_config_count(4, 2, (2, 2))  # wrong number of blocks
    # exchangeable in the non-anchored coordinates
    assert block_config_count(6, 3, (2, 1, 1, 2)) == block_config_count(6, 3, (2, 2, 1, 1))


def test_final_prey_mean_scales_like_sqrt_m():
    # E[R at the last merge] = sum (m-k) p_mk(m,k) grows like sqrt(pi/2) sqrt(m)
    import math

    for m in (10_000, 40_000):
        mean_r = sum((m - k) * p_mk(m, k) for k in range(1, m))
        target = math.sqrt(math.pi / 2.0) * math.sqrt(m)
        assert abs(mean_r / target - 1.0) < 0.05, (m, mean_r, target)


def test_marginals_match_across_oracles_n6():
    # spot-check a heavier case: per-step L marginals at n = 6
    park = enumerate_parking(6)
    dp = partition_dp(6)
    for k in (1, 3, 5):
        assert park.marginal(k, "L") == dp.l_marginal(k)
