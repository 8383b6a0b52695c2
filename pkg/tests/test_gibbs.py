import warnings

import numpy as np
import pytest

from fpulab.errors import BlowUpError, InsufficientDataError, InvalidInputError
from fpulab.gibbs import (
    EnsembleRun,
    GibbsConfig,
    GibbsDraws,
    ModeProfile,
    adiabatic_probe,
    autocorrelation,
    autocorrelation_from_run,
    ensemble_stats,
    evolve_ensemble,
    first_crossing,
    harmonic_covariance,
    integrated_time,
    phi_g,
    phi_g_arrays,
    profile_weights,
    sample_gibbs,
    variance,
)
from fpulab.integrators import IntegratorConfig, hamiltonian_arrays
from fpulab.lattice import DIRICHLET, PERIODIC, ChainParams, LatticeState, harmonic_energy
from fpulab.spectral import mode_energies, mode_energy_arrays


def chain(N=15, A=1.0):
    return ChainParams(N, DIRICHLET, A=A)


# --------------------------------------------------------------------- profiles


@pytest.mark.parametrize(
    "profile",
    [
        ModeProfile.constant(0.7),
        ModeProfile.raised_cosine(0.0, 0.3),
        ModeProfile.raised_cosine(0.5, 0.2, power=3),
        ModeProfile.plateau(0.0, 0.3, 0.15),
        ModeProfile.plateau(0.2, 0.5, 0.1),
    ],
)
def test_profile_derivative_and_sign(profile):
    x = np.linspace(0.0, 1.0, 2001)
    g = profile(x)
    assert np.all(g >= 0)
    h = 1e-6
    xi = x[1:-1]
    fd = (profile(xi + h) - profile(xi - h)) / (2 * h)
    assert np.max(np.abs(fd - profile.derivative(xi))) <= 1e-6
    assert profile.flat_at_origin
    # at the grid scale of an N = 63 chain the slope at the origin is invisible
    assert abs(profile(1 / 64) - profile(0.0)) <= 0.05


def test_profile_rejects_bad_parameters():
    with pytest.raises(InvalidInputError):
        ModeProfile("triangle")
    with pytest.raises(InvalidInputError):
        ModeProfile.constant(-1)
    with pytest.raises(InvalidInputError):
        ModeProfile.raised_cosine(0, 0)
    assert not ModeProfile.raised_cosine(0.1, 0.3).flat_at_origin


def test_phi_g_trivial_cases(rng):
    c = chain(12)
    s = LatticeState(rng.normal(scale=0.1, size=12), rng.normal(scale=0.1, size=12))
    assert phi_g(s, ModeProfile.constant(1.0), c) == pytest.approx(harmonic_energy(s, c), rel=1e-12)
    assert phi_g(s, ModeProfile.constant(0.0), c) == 0.0
    cp = ChainParams.from_modes(6, PERIODIC)
    q = rng.normal(size=cp.sites)
    sp = LatticeState(q - q.mean(), np.zeros(cp.sites))
    assert phi_g(sp, ModeProfile.constant(1.0), cp) == pytest.approx(harmonic_energy(sp, cp), rel=1e-12)


def test_phi_g_direct_partial_sum(rng):
    c = chain(20)
    s = LatticeState(rng.normal(scale=0.1, size=20), rng.normal(scale=0.1, size=20))
    prof = ModeProfile.plateau(0.0, 0.4, 0.1)
    E = mode_energies(s, c).energy
    direct = 0.0
    for k in range(1, 21):
        direct += float(prof(k / 21)) * E[k - 1]
    assert phi_g(s, prof, c) == pytest.approx(direct, abs=1e-12)


# --------------------------------------------------------------------- sampler


def test_config_validation():
    with pytest.raises(InvalidInputError):
        GibbsConfig(0.0, chain())
    with pytest.raises(InvalidInputError):
        GibbsConfig(1.0, ChainParams(8))
    with pytest.raises(InvalidInputError):
        GibbsConfig(1.0, chain(), samples=1)
    with pytest.raises(InvalidInputError):
        GibbsConfig(1.0, chain(), thin=0)


def test_sampler_deterministic():
    cfg = GibbsConfig(10.0, chain(8), burn_in=200, samples=50, thin=2, seed=11)
    a, b = sample_gibbs(cfg), sample_gibbs(cfg)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.p, b.p)
    c = sample_gibbs(GibbsConfig(10.0, chain(8), burn_in=200, samples=50, thin=2, seed=12))
    assert not np.array_equal(a.q, c.q)
    states = list(a)
    assert len(states) == 50 and isinstance(states[0], LatticeState)


def test_sampler_acceptance_in_target_band():
    d = sample_gibbs(GibbsConfig(10.0, chain(31), burn_in=2000, samples=200, thin=5, seed=1))
    assert 0.25 <= d.acceptance <= 0.55


def test_kinetic_moments():
    beta = 10.0
    d = sample_gibbs(GibbsConfig(beta, chain(31), burn_in=500, samples=10_000, thin=1, seed=5))
    p = d.p.ravel()
    for x, truth in ((p**2, 1 / beta), (p**4, 3 / beta**2)):
        se = np.std(x, ddof=1) / np.sqrt(x.size)
        assert abs(x.mean() - truth) <= 3 * se


def test_harmonic_limit_equipartition_and_covariance():
    beta = 1e3
    N = 15
    d = sample_gibbs(GibbsConfig(beta, chain(N), burn_in=2000, samples=4000, thin=20, seed=1))
    E = mode_energy_arrays(d.q, d.p, d.params)
    assert np.all(np.abs(E.mean(axis=0) * beta - 1) <= 0.05)
    cov = np.cov(d.q.T)
    exact = harmonic_covariance(N, beta)
    assert np.all(np.abs(np.diag(cov) / np.diag(exact) - 1) <= 0.05)


# --------------------------------------------------------------------- statistics


def test_ensemble_stats_constant_warns():
    with pytest.warns(RuntimeWarning):
        st = ensemble_stats(np.full(100, 2.0))
    assert st.variance == 0.0 and st.degenerate and st.ess <= st.n
    with pytest.raises(InsufficientDataError):
        ensemble_stats([1.0])


def test_ensemble_stats_gaussian(rng):
    x = rng.normal(1.5, 2.0, size=20000)
    st = ensemble_stats(x)
    assert abs(st.mean - 1.5) <= 3 * st.se_mean
    assert abs(st.variance - 4.0) <= 3 * st.se_variance
    assert st.ess <= st.n


def test_integrated_time_ar1(rng):
    phi = 0.9
    x = np.empty(200_000)
    x[0] = 0
    e = rng.normal(size=x.size)
    for i in range(1, x.size):
        x[i] = phi * x[i - 1] + e[i]
    assert integrated_time(x) == pytest.approx((1 + phi) / (1 - phi), rel=0.15)
    st = ensemble_stats(x)
    assert st.ess == pytest.approx(x.size / integrated_time(x)) and st.ess <= st.n


def test_first_crossing():
    t = np.array([0.0, 1.0, 2.0])
    assert first_crossing(t, [0.0, 0.1, 0.3], 0.2) == pytest.approx(1.5)
    assert first_crossing(t, [0.0, 0.1, 0.15], 0.2) == float("inf")


# --------------------------------------------------------------------- dynamics


@pytest.fixture(scope="module")
def draws15():
    return sample_gibbs(GibbsConfig(10.0, chain(15), burn_in=3000, samples=1000, thin=20, seed=2))


def test_autocorrelation_identities(draws15):
    c = draws15.params
    integ = IntegratorConfig(0.05, T=20.0, stride=20)
    w = profile_weights(ModeProfile.raised_cosine(0, 0.3), c)
    st = autocorrelation(lambda q, p: phi_g_arrays(q, p, w, c), GibbsConfig(10.0, c), integ, n_traj=300, draws=draws15)
    F0 = phi_g_arrays(draws15.q, draws15.p, w, c)[np.linspace(0, 999, 300).round().astype(int)]
    assert st.autocorr[0] == st.variance
    assert st.autocorr[0] == pytest.approx(variance(F0), rel=1e-12)
    assert np.all(st.autocorr <= st.autocorr[0] + 3 * st.autocorr_se)
    H = autocorrelation(lambda q, p: hamiltonian_arrays(q, p, c), GibbsConfig(10.0, c), integ, n_traj=300, draws=draws15)
    assert np.max(np.abs(H.autocorr / H.autocorr[0] - 1)) <= 1e-6


def test_stationarity_of_mode_energies(draws15):
    c = draws15.params
    sub = GibbsDraws(draws15.q, draws15.p, c, draws15.acceptance, draws15.width, draws15.beta)
    run = evolve_ensemble(sub, IntegratorConfig(0.05, T=100.0, stride=2000), lambda q, p: mode_energy_arrays(q, p, c))
    E0, E1 = run.values[0], run.values[-1]
    n = E0.shape[0]
    se = np.sqrt(E0.var(axis=0, ddof=1) / n + E1.var(axis=0, ddof=1) / n)
    assert np.all(np.abs(E1.mean(axis=0) - E0.mean(axis=0)) <= 3 * se)


def test_blow_ups_excluded_then_abort():
    c = chain(4, A=-1.0)
    q = np.zeros((200, 4))
    q[0] = [3.0, -3.0, 3.0, -3.0]
    d = GibbsDraws(q, np.zeros_like(q), c, 0.4, 0.1, 1.0)
    integ = IntegratorConfig(0.05, T=50.0, stride=100)
    run = evolve_ensemble(d, integ, lambda q, p: q.sum(axis=1), max_failed_fraction=0.01)
    assert run.n_excluded == 1 and run.values.shape[1] == 199
    q[1] = q[0]
    q[2] = q[0]
    with pytest.raises(BlowUpError):
        evolve_ensemble(GibbsDraws(q, np.zeros_like(q), c, 0.4, 0.1, 1.0), integ, lambda q, p: q.sum(axis=1))


def test_probe_preconditions(draws15):
    g = GibbsConfig(10.0, draws15.params)
    integ = IntegratorConfig(0.05, T=1.0)
    with pytest.raises(InvalidInputError):
        adiabatic_probe(ModeProfile.raised_cosine(0.1, 0.3), g, integ, 1.0, draws=draws15)
    with pytest.raises(InvalidInputError):
        adiabatic_probe(ModeProfile.constant(), g, integ, 1.0, beta_star=20.0, draws=draws15)
    with pytest.raises(InvalidInputError):
        adiabatic_probe(ModeProfile.constant(), g, integ, 0.0, draws=draws15)
    with pytest.raises(InsufficientDataError):
        adiabatic_probe(ModeProfile.constant(), g, integ, 1.0, n_traj=5000, draws=draws15)


def test_probe_starts_at_zero(draws15):
    r = adiabatic_probe(ModeProfile.raised_cosine(0, 0.3), GibbsConfig(10.0, draws15.params), IntegratorConfig(0.05, T=10.0, stride=20), 0.01, draws=draws15)
    assert r.exceedance[0] == 0 and r.median_drift[0] == 0 and r.times[0] == 0


def test_harmonic_energy_probe_never_exceeds():
    c = chain(63)
    g = GibbsConfig(100.0, c, burn_in=3000, samples=1000, thin=20, seed=4)
    r = adiabatic_probe(ModeProfile.constant(1.0), g, IntegratorConfig(0.05, T=200.0, stride=20), delta1=0.5)
    assert np.all(r.exceedance == 0)


def test_multi_packet_domination():
    g = GibbsConfig(50.0, chain(31), burn_in=3000, samples=1000, thin=40, seed=3)
    d = sample_gibbs(g)
    integ = IntegratorConfig(0.05, T=100.0, stride=20)
    g1 = ModeProfile.raised_cosine(0.0, 0.25)
    g2 = ModeProfile.raised_cosine(0.6, 0.2)
    r1 = adiabatic_probe(g1, g, integ, 1.0, draws=d)
    r2 = adiabatic_probe(g2, g, integ, 1.0, draws=d)
    r12 = adiabatic_probe((g1, g2), g, integ, 1.0, draws=d)
    se = np.maximum(np.maximum(r12.exceedance_se, r1.exceedance_se), 1.0 / r12.n_traj)
    assert np.all(r12.exceedance <= np.maximum(r1.exceedance, r2.exceedance) + 3 * se)


def test_autocorrelation_from_run_matches_variance():
    vals = np.array([[1.0, 2.0, 4.0], [1.5, 2.0, 3.5]])
    st = autocorrelation_from_run(EnsembleRun(np.array([0.0, 1.0]), vals, 0))
    assert st.autocorr[0] == variance(vals[0])
