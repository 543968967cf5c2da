import itertools
import math

import numpy as np
import pytest

from chaosnorm.coefficients import MissingCoefficientError, chaos_norm_partial, coefficient, table_build
from chaosnorm.patterns import canonicalize
from chaosnorm.stein import (UnsupportedTruncationError, berry_esseen_bound, bound_report, bracket_kernel_norms,
                             classical_bound, h0_check, report_csv, required_table, restricted_growth_strings,
                             stein_discrepancy, toy_term)


@pytest.fixture(scope="module")
def table():
    return required_table([2, 3, 4, 8, 16, 32, 64], m_max=2, r_max=6, cache_policy="off")


def _a(idx, n):
    return coefficient(canonicalize(idx), n)


def _brute_shell(n, m, r_max, symmetrize=False):
    big_m = 2 * m
    h = {}
    for i in itertools.product(range(n), repeat=big_m):
        acc = 0.0
        for k in range(big_m + 1):
            for r in range(r_max + 1):
                if (k + r) % 2:
                    continue
                s = sum(_a(u + i[:k], n) * _a(u + i[k:], n) for u in itertools.product(range(n), repeat=r + 1))
                acc += s / (math.factorial(k) * math.factorial(big_m - k) * math.factorial(r) * (big_m - k + r + 1))
        h[i] = acc
    if symmetrize:
        perms = list(itertools.permutations(range(big_m)))
        h = {i: sum(h[tuple(i[s] for s in p)] for p in perms) / len(perms) for i in h}
    return math.factorial(big_m) * sum(v * v for v in h.values())


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("r_max", [0, 1, 2])
def test_grouped_m1_shell_matches_brute_force(table, n, r_max):
    got = bracket_kernel_norms(table, n, 1, r_max).per_order[1]
    assert got == pytest.approx(_brute_shell(n, 1, r_max), rel=1e-13)


@pytest.mark.parametrize("symmetrize", [False, True])
@pytest.mark.parametrize("n,r_max", [(2, 2), (3, 1)])
def test_grouped_m2_shell_matches_brute_force(table, n, r_max, symmetrize):
    got = bracket_kernel_norms(table, n, 2, r_max, symmetrize=symmetrize).per_order[2]
    assert got == pytest.approx(_brute_shell(n, 2, r_max, symmetrize), rel=1e-12)


def test_symmetrizing_can_only_shrink(table):
    for n in (4, 8):
        raw = bracket_kernel_norms(table, n, 2, 4)
        sym = bracket_kernel_norms(table, n, 2, 4, symmetrize=True)
        assert sym.per_order[1] == pytest.approx(raw.per_order[1], rel=1e-14)
        assert 0 < sym.per_order[2] <= raw.per_order[2]


def test_restricted_growth_strings_are_bell_numbers():
    assert [len(restricted_growth_strings(k)) for k in range(1, 7)] == [1, 2, 5, 15, 52, 203]


def test_report_structure(table):
    r = bracket_kernel_norms(table, 8, 2, 4)
    assert set(r.per_order) == {1, 2}
    assert all(v > 0 for v in r.per_order.values())
    assert r.total == pytest.approx(sum(r.per_order.values()), rel=1e-15)
    assert r.per_order[1] > r.per_order[2]
    assert r.truncation_diagnostic == r.per_order[2]
    assert r.k_max == 9


def test_total_grows_with_m_max(table):
    for r_max in (2, 4, 6):
        assert stein_discrepancy(table, 8, 2, r_max) >= stein_discrepancy(table, 8, 1, r_max)


def test_r_truncation_settles(table):
    # r only adds signed terms inside h, so the total is not monotone in r_max; it does settle
    vals = [stein_discrepancy(table, 8, 2, r) for r in (2, 4, 6)]
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])
    assert abs(vals[2] - vals[1]) < 0.02 * vals[2]


def test_discrepancy_decreases_and_roughly_halves(table):
    ns = [8, 16, 32, 64]
    vals = [stein_discrepancy(table, n) for n in ns]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    assert all(0.35 < q < 0.55 for q in ratios)
    # the n^-2 shell fades, so the ratio drifts up towards 1/2
    assert ratios == sorted(ratios)


def test_deterministic(table):
    assert stein_discrepancy(table, 8) == stein_discrepancy(table, 8)


def test_truncation_errors(table):
    with pytest.raises(UnsupportedTruncationError):
        bracket_kernel_norms(table, 8, 5, 2)
    with pytest.raises(ValueError):
        bracket_kernel_norms(table, 8, 0, 2)
    small = table_build([8], 2, cache_policy="off")
    with pytest.raises(MissingCoefficientError) as info:
        bracket_kernel_norms(small, 8, 2, 4)
    assert "n=8" in str(info.value)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_h0_matches_chaos_norm(table, n):
    assert h0_check(table, n, 7) == pytest.approx(chaos_norm_partial(n, 3)[-1], abs=1e-12)


def test_h0_examples():
    t = table_build([2, 8], 6, cache_policy="off")
    assert h0_check(t, 2, 13) == pytest.approx(chaos_norm_partial(2, 6)[-1], abs=1e-12)
    assert 0.9 < h0_check(t, 8, 5) < 1.0


def test_toy_term_brute_force_n2(table):
    n = 2
    brute = sum(sum(_a((u,), n) * _a((u, j, j), n) for u in range(n)) ** 2 for j in range(n)) / 3
    assert toy_term(table, n) == pytest.approx(brute, abs=1e-14)


def test_toy_term_scaling_and_domination(table):
    scaled = [n * toy_term(table, n) for n in (8, 16, 32, 64)]
    assert min(scaled) > 0.25 and max(scaled) < 0.4
    for n in (8, 16, 32, 64):
        assert toy_term(table, n) <= stein_discrepancy(table, n, 1, 2)


def test_berry_esseen_constants():
    assert berry_esseen_bound(0.04, "kolmogorov") == pytest.approx(0.2)
    assert berry_esseen_bound(0.04, "wasserstein") == pytest.approx(0.2)
    assert berry_esseen_bound(0.04, "total_variation") == pytest.approx(0.4)
    assert berry_esseen_bound(0.04, "fortet_mourier") == pytest.approx(0.8)
    with pytest.raises(ValueError):
        berry_esseen_bound(-1e-3, "kolmogorov")
    with pytest.raises(ValueError):
        berry_esseen_bound(0.1, "hellinger")


def test_classical_bound():
    assert classical_bound(16, 3) == pytest.approx(9.9736, abs=1e-3)
    assert classical_bound(1, 3) == pytest.approx(25 * 2 * math.sqrt(2 / math.pi))
    assert classical_bound(100, 2 + 1e-9) == pytest.approx(25.0, rel=1e-6)
    assert classical_bound(1591, 3) > 1 > classical_bound(1592, 3)
    for p in (2.0, 3.5):
        with pytest.raises(ValueError):
            classical_bound(10, p)


def test_bound_report_and_csv(table):
    reports = [bound_report(table, n) for n in (8, 64)]
    r = reports[0]
    assert r.bound_total_variation == pytest.approx(2 * r.bound_kolmogorov)
    assert r.bound_fortet_mourier == pytest.approx(4 * r.bound_kolmogorov)
    assert not r.domination_armed and reports[1].domination_armed
    lines = report_csv(reports).splitlines()
    assert lines[0] == ("n,m_max,r_max,discrepancy,shell_m1,shell_m2,last_shell_diag,"
                        "bound_K,bound_W,bound_TV,bound_FM,classical_p3")
    assert len(lines) == 3 and lines[1].startswith("8,2,4,")


def _grad_f(y):
    s = y.sum(-1, keepdims=True)
    v2 = (y * y).sum(-1, keepdims=True)
    v = np.sqrt(v2)
    return 1 / v - s * y / (v2 * v)


def _mehler_discrepancy(n, outer, inner, seed):
    # -DL^{-1}F = E_{t ~ Exp(1), X'} DF(e^-t X + sqrt(1 - e^-2t) X'); two independent inner
    # averages make (G1 - 1)(G2 - 1) unbiased for (G - 1)^2
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(outer // 2000):
        x = rng.standard_normal((2000, n))
        dfx = _grad_f(x)
        g = []
        for _rep in range(2):
            t = rng.exponential(size=(2000, inner, 1))
            y = np.exp(-t) * x[:, None, :] + np.sqrt(1 - np.exp(-2 * t)) * rng.standard_normal((2000, inner, n))
            g.append((dfx * _grad_f(y).mean(1)).sum(-1))
        draws.append((g[0] - 1) * (g[1] - 1))
    d = np.concatenate(draws)
    return d.mean(), d.std(ddof=1) / math.sqrt(d.size)


def test_symmetrized_form_matches_mehler_simulation():
    n = 16
    t = required_table([n], 3, 8, cache_policy="off")
    sym = bracket_kernel_norms(t, n, 3, 8, symmetrize=True).total
    raw = bracket_kernel_norms(t, n, 3, 8).total
    est, se = _mehler_discrepancy(n, 100_000, 20, 1)
    # truncation at m = 3 leaves a small positive remainder
    assert abs(est - sym) < 4 * se + 0.015 * sym
    assert raw > sym
