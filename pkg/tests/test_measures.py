import math

import numpy as np
import pytest

from anderson_lab.measures import (
    AtomReweight,
    BumpSchedule,
    CONDITION_MEAN,
    CONDITION_SUMMABLE,
    CONDITION_UNIFORM,
    ExplicitSites,
    FiniteAtoms,
    Identity,
    ParetoTail,
    PowersOfTwoSites,
    PotentialWindow,
    ProductLaw,
    RejectionCapError,
    UniformInterval,
    VERDICT_HOLDS,
    VERDICT_VIOLATED,
    condition_report,
    radon_nikodym_product,
    sample_window,
    sample_windows,
    sup_norm_log_partials,
)
from anderson_lab.rng import RngStream

BERNOULLI = FiniteAtoms(atoms=((-1.0, 0.5), (1.0, 0.5)))


# ---------------------------------------------------------------------------
# construction invariants
# ---------------------------------------------------------------------------

def test_atom_weights_must_sum_to_one():
    with pytest.raises(ValueError, match="sum to 1"):
        FiniteAtoms(atoms=((-1.0, 0.5), (1.0, 0.4)))


def test_atom_locations_must_be_distinct():
    with pytest.raises(ValueError, match="distinct"):
        FiniteAtoms(atoms=((1.0, 0.5), (1.0, 0.5)))


def test_single_atom_needs_explicit_escape_hatch():
    with pytest.raises(ValueError, match="two points"):
        FiniteAtoms(atoms=((5.0, 1.0),))
    trivial = FiniteAtoms(atoms=((5.0, 1.0),), allow_trivial=True)
    assert trivial.locations[0] == 5.0


def test_uniform_interval_orientation():
    with pytest.raises(ValueError):
        UniformInterval(lo=2.0, hi=1.0)


def test_pareto_moment_condition():
    with pytest.raises(ValueError, match="exceed alpha_moment"):
        ParetoTail(scale=1.0, exponent=1.0, alpha_moment=1.0)
    p = ParetoTail(scale=2.0, exponent=3.0, alpha_moment=1.0)
    # E|X|^a = b s^a / (b - a)
    assert p.abs_moment(1.0) == pytest.approx(3.0 * 2.0 / 2.0)
    assert p.abs_moment(3.0) == math.inf


def test_exact_law_forces_identity_densities():
    seq = AtomReweight(BERNOULLI, {0: (0.75, 0.25)})
    with pytest.raises(ValueError, match="identity"):
        ProductLaw(BERNOULLI, seq, "exact")


def test_reweight_vectors_validated():
    with pytest.raises(ValueError, match="sum to 1"):
        AtomReweight(BERNOULLI, {0: (0.8, 0.1)})
    with pytest.raises(ValueError, match="length"):
        AtomReweight(BERNOULLI, {0: (1.0,)})


def test_window_shape_and_finiteness():
    with pytest.raises(ValueError):
        PotentialWindow(0, 2, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        PotentialWindow(0, 0, np.array([np.inf]))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_window_stays_on_support():
    win = sample_window(ProductLaw.exact(BERNOULLI), 0, 3, RngStream(1))
    assert set(np.unique(win.values)) <= {-1.0, 1.0}
    assert len(win) == 4


def test_degenerate_reweight_pins_the_value():
    seq = AtomReweight(BERNOULLI, {n: (1.0, 0.0) for n in range(5)})
    law = ProductLaw.approximate(BERNOULLI, seq)
    win = sample_window(law, 0, 4, RngStream(2))
    assert np.all(win.values == -1.0)


def test_bernoulli_window_mean_is_clt_small():
    win = sample_window(ProductLaw.exact(BERNOULLI), 0, 10_000, RngStream(3))
    assert abs(np.mean(win.values)) <= 4.0 / math.sqrt(10_001)


def test_sampling_is_deterministic_in_the_stream():
    law = ProductLaw.exact(BERNOULLI)
    a = sample_window(law, -5, 5, RngStream(9, (1,)))
    b = sample_window(law, -5, 5, RngStream(9, (1,)))
    c = sample_window(law, -5, 5, RngStream(9, (2,)))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_site_marginals_converge_to_reweighted_weights():
    beta = (0.75, 0.25)
    seq = AtomReweight(BERNOULLI, {0: beta})
    law = ProductLaw.approximate(BERNOULLI, seq)
    values = sample_windows(law, 0, 0, 100_000, RngStream(4))[:, 0]
    for loc, target in zip((-1.0, 1.0), beta):
        freq = np.mean(values == loc)
        assert abs(freq - target) <= 4.0 * math.sqrt(target * (1 - target) / 100_000)


def test_continuous_bump_rejection_sampling():
    base = UniformInterval(lo=0.0, hi=1.0)
    # tilted density 2x on [0, 1]: mass 1, sup 2
    seq = BumpSchedule(
        sites=ExplicitSites(frozenset({0})), base=base,
        density=lambda x: 2.0 * x, density_sup=2.0,
    )
    law = ProductLaw.approximate(base, seq)
    values = sample_windows(law, 0, 0, 50_000, RngStream(5))[:, 0]
    # E[X] under 2x dx is 2/3
    assert abs(np.mean(values) - 2.0 / 3.0) < 0.01


def test_bump_density_mass_is_checked():
    base = UniformInterval(lo=0.0, hi=1.0)
    with pytest.raises(ValueError, match="mass"):
        BumpSchedule(
            sites=ExplicitSites(frozenset({0})), base=base,
            density=lambda x: 3.0 * x, density_sup=3.0,
        )


def test_rejection_cap_names_the_site():
    # a misconfigured density (all mass on a sliver the proposals almost never
    # hit) must abort with the offending site, not loop forever
    from anderson_lab.measures import DensitySequence

    class Sliver(DensitySequence):
        def eval(self, n, values):
            return np.where(np.asarray(values) < 1e-9, 1e9, 0.0)

        def sup_norm(self, n):
            return 2.0  # declared far below the true peak

        def is_identity_at(self, n):
            return n != 7

        def perturbed_sites(self, lo, hi):
            return [7] if lo <= 7 <= hi else []

    base = UniformInterval(lo=0.0, hi=1.0)
    law = ProductLaw.approximate(base, Sliver())
    with pytest.raises(RejectionCapError, match="site 7"):
        sample_windows(law, 7, 7, 50, RngStream(6))


# ---------------------------------------------------------------------------
# Radon-Nikodym products
# ---------------------------------------------------------------------------

def test_identity_log_density_is_exactly_zero():
    law = ProductLaw.exact(BERNOULLI)
    win = sample_window(law, -3, 3, RngStream(7))
    assert radon_nikodym_product(law, win) == 0.0


def test_two_site_reweight_closed_form():
    seq = AtomReweight(BERNOULLI, {0: (0.75, 0.25), 1: (0.75, 0.25)})
    law = ProductLaw.approximate(BERNOULLI, seq)
    win = PotentialWindow(0, 1, np.array([-1.0, -1.0]))
    assert radon_nikodym_product(law, win) == pytest.approx(2 * math.log(1.5), abs=1e-15)


def test_zero_density_value_gives_minus_infinity():
    seq = AtomReweight(BERNOULLI, {0: (1.0, 0.0)})
    law = ProductLaw.approximate(BERNOULLI, seq)
    win = PotentialWindow(0, 0, np.array([1.0]))
    assert radon_nikodym_product(law, win) == -math.inf


def test_values_outside_support_are_rejected():
    law = ProductLaw.exact(BERNOULLI)
    with pytest.raises(ValueError, match="support"):
        radon_nikodym_product(law, PotentialWindow(0, 0, np.array([0.5])))


def test_log_density_additive_over_adjacent_windows():
    seq = AtomReweight(
        BERNOULLI, {n: (0.6, 0.4) if n % 2 else (0.3, 0.7) for n in range(-6, 7)}
    )
    law = ProductLaw.approximate(BERNOULLI, seq)
    win = sample_window(law, -6, 6, RngStream(8))
    whole = radon_nikodym_product(law, win)
    split = radon_nikodym_product(law, win.slice(-6, 0)) + radon_nikodym_product(
        law, win.slice(1, 6)
    )
    assert split == pytest.approx(whole, abs=1e-12)


def test_monte_carlo_change_of_measure_identity():
    # E_exact[chi_A * H] == P_approx[A] for the cylinder A = {V0=+1, V1=-1},
    # both matching the exact atom-product probability
    beta0, beta1 = (0.75, 0.25), (0.25, 0.75)
    seq = AtomReweight(BERNOULLI, {0: beta0, 1: beta1})
    law0 = ProductLaw.approximate(BERNOULLI, seq)
    law1 = ProductLaw.exact(BERNOULLI)
    exact_prob = beta0[1] * beta1[0]  # P[V0=+1] * P[V1=-1] under the reweighted law

    m = 100_000
    wins1 = sample_windows(law1, 0, 1, m, RngStream(10))
    chi = (wins1[:, 0] == 1.0) & (wins1[:, 1] == -1.0)
    # H = g0(V0) g1(V1) with g(x_i) = beta_i / w_i
    g0 = np.where(wins1[:, 0] == 1.0, beta0[1] / 0.5, beta0[0] / 0.5)
    g1 = np.where(wins1[:, 1] == 1.0, beta1[1] / 0.5, beta1[0] / 0.5)
    lifted = chi * g0 * g1
    lhs = float(np.mean(lifted))
    se_lhs = float(np.std(lifted, ddof=1) / math.sqrt(m))

    wins0 = sample_windows(law0, 0, 1, m, RngStream(11))
    hits = (wins0[:, 0] == 1.0) & (wins0[:, 1] == -1.0)
    rhs = float(np.mean(hits))
    se_rhs = math.sqrt(rhs * (1 - rhs) / m)

    assert abs(lhs - exact_prob) <= 3 * se_lhs
    assert abs(rhs - exact_prob) <= 3 * se_rhs
    assert abs(lhs - rhs) <= 3 * math.hypot(se_lhs, se_rhs)


# ---------------------------------------------------------------------------
# decay-condition diagnostics
# ---------------------------------------------------------------------------

def test_partials_identity_zero():
    assert sup_norm_log_partials(Identity(), 100) == 0.0


def test_partials_constant_schedule():
    seq = AtomReweight(BERNOULLI, {n: (0.75, 0.25) for n in range(-50, 51)})
    # every site has sup norm 1.5 on [-50, 50]
    n = 50
    expect = (2 * n + 1) * math.log(1.5) / n
    assert sup_norm_log_partials(seq, n) == pytest.approx(expect, rel=1e-14)


def test_partials_bumps_match_direct_sum_and_vanish():
    seq = BumpSchedule(sites=PowersOfTwoSites(), base=BERNOULLI, weights=(0.75, 0.25))
    for n in (64, 512, 4096):
        direct = math.fsum(seq.log_sup_norm(k) for k in range(-n, n + 1)) / n
        assert sup_norm_log_partials(seq, n) == pytest.approx(direct, rel=1e-14)
        assert direct <= 2 * math.log(1.5) * (math.log2(n) + 1) / n
    assert sup_norm_log_partials(seq, 4096) < 0.01


def test_condition_report_identity_all_hold():
    report = condition_report(Identity(), 256, 16)
    assert np.all(report.mean == 0.0)
    assert np.all(report.uniform == 0.0)
    assert np.all(report.partial_sums == 0.0)
    for verdict in report.verdicts.values():
        assert verdict.verdict == VERDICT_HOLDS


def test_condition_report_constant_schedule_violates_mean():
    sites = ExplicitSites(frozenset(range(-5000, 5001)))
    seq = BumpSchedule(sites=sites, base=BERNOULLI, weights=(2 / 3, 1 / 3))
    # sup norm 4/3 at every site: the Cesaro mean tends to 2 log(4/3) != 0
    report = condition_report(seq, 2048, 16)
    assert report.verdicts[CONDITION_MEAN].verdict == VERDICT_VIOLATED
    assert report.verdicts[CONDITION_MEAN].value_end == pytest.approx(
        2 * math.log(4 / 3), rel=0.01
    )


def test_condition_report_bumps_split_the_conditions():
    seq = BumpSchedule(sites=PowersOfTwoSites(), base=BERNOULLI, weights=(0.75, 0.25))
    report = condition_report(seq, 4096, 64)
    assert report.verdicts[CONDITION_MEAN].verdict == VERDICT_HOLDS
    assert report.verdicts[CONDITION_UNIFORM].verdict == VERDICT_HOLDS
    assert report.verdicts[CONDITION_SUMMABLE].verdict == VERDICT_VIOLATED
    # partial sums grow like log2(N)
    n_end = report.n_grid[-1]
    assert report.partial_sums[-1] == pytest.approx(
        2 * math.log(1.5) * (math.floor(math.log2(n_end)) + 1), rel=1e-12
    )


def test_condition_verdicts_respect_implication_order():
    strength = {VERDICT_VIOLATED: 0, "inconclusive": 1, VERDICT_HOLDS: 2}
    schedules = [
        Identity(),
        AtomReweight(BERNOULLI, {0: (0.9, 0.1), 17: (0.2, 0.8)}),
        BumpSchedule(sites=PowersOfTwoSites(), base=BERNOULLI, weights=(0.75, 0.25)),
        BumpSchedule(
            sites=ExplicitSites(frozenset(range(-600, 601, 3))),
            base=BERNOULLI, weights=(0.9, 0.1),
        ),
    ]
    for seq in schedules:
        report = condition_report(seq, 512, 32)
        s_mean = strength[report.verdicts[CONDITION_MEAN].verdict]
        s_unif = strength[report.verdicts[CONDITION_UNIFORM].verdict]
        s_sum = strength[report.verdicts[CONDITION_SUMMABLE].verdict]
        assert s_mean >= s_unif >= s_sum


def test_finite_schedule_is_summable():
    seq = AtomReweight(BERNOULLI, {-3: (0.9, 0.1), 0: (0.2, 0.8), 11: (0.7, 0.3)})
    report = condition_report(seq, 1024, 32)
    for verdict in report.verdicts.values():
        assert verdict.verdict == VERDICT_HOLDS
