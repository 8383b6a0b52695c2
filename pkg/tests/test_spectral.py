import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpulab.errors import InsufficientDataError, InvalidInputError
from fpulab.lattice import DIRICHLET, PERIODIC, ChainParams, LatticeState, harmonic_energy
from fpulab.spectral import (
    EnergyTrace,
    basis_matrix,
    forward,
    frequencies,
    from_modes,
    inverse,
    mode_energies,
    packet_fit,
    running_average,
    spectral_entropy,
    time_average,
    to_modes,
    wavenumbers,
)

BOUNDARIES = [PERIODIC, DIRICHLET]


def zero_mean_state(rng, c, scale=0.1):
    q = rng.normal(scale=scale, size=c.sites)
    p = rng.normal(scale=scale, size=c.sites)
    if c.boundary == PERIODIC:
        q -= q.mean()
        p -= p.mean()
    return LatticeState(q, p)


def test_frequency_values():
    assert frequencies(1, DIRICHLET, 1) == pytest.approx(np.sqrt(2), rel=1e-15)
    assert frequencies(7, PERIODIC, -8) == pytest.approx(2.0, rel=1e-15)
    for N in (1, 5, 31):
        w = frequencies(N, DIRICHLET)
        assert np.all(np.diff(w) > 0) and np.all((w > 0) & (w <= 2))
        k = np.arange(1, N + 1)
        assert np.array_equal(w, 2 * np.sin(k * np.pi / (2 * (N + 1))))
    with pytest.raises(InvalidInputError):
        frequencies(0)


@pytest.mark.parametrize("boundary", BOUNDARIES)
@pytest.mark.parametrize("N", [1, 2, 15, 63, 255])
def test_basis_orthonormal(boundary, N):
    B = basis_matrix(ChainParams.from_modes(N, boundary))
    assert np.max(np.abs(B @ B.T - np.eye(B.shape[0]))) <= 1e-12


def test_periodic_basis_closed_form():
    # independent evaluation of the Fourier vectors from their defining formulas
    N = 4
    M = 2 * N + 2
    B = basis_matrix(ChainParams.from_modes(N))
    j = np.arange(M)
    for row, k in zip(B, wavenumbers(N)):
        if k > 0:
            ref = np.sin(2 * np.pi * k * j / M) / np.sqrt(N + 1)
        elif k == 0:
            ref = np.ones(M) / np.sqrt(M)
        elif k == -N - 1:
            ref = np.cos(np.pi * j) / np.sqrt(M)
        else:
            ref = np.cos(2 * np.pi * k * j / M) / np.sqrt(N + 1)
        assert np.allclose(row, ref, atol=1e-15)


@pytest.mark.parametrize("boundary", BOUNDARIES)
@pytest.mark.parametrize("N", [1, 3, 16, 64])
def test_fast_matches_direct(rng, boundary, N):
    c = ChainParams.from_modes(N, boundary)
    x = rng.normal(size=(5, c.sites))
    assert np.max(np.abs(forward(x, c) - forward(x, c, "direct"))) <= 1e-12
    assert np.max(np.abs(inverse(x, c) - inverse(x, c, "direct"))) <= 1e-12


@pytest.mark.parametrize("boundary", BOUNDARIES)
def test_unit_mode_and_round_trip(rng, boundary):
    c = ChainParams.from_modes(10, boundary)
    k = wavenumbers(c.N, boundary)
    i1 = int(np.flatnonzero(k == 1)[0])
    s = LatticeState(basis_matrix(c)[i1], np.zeros(c.sites))
    ph, qh = to_modes(s, c)
    e = np.zeros(c.sites)
    e[i1] = 1
    assert np.allclose(qh, e, atol=1e-14) and np.all(ph == 0)
    s = zero_mean_state(rng, c)
    back = from_modes(*to_modes(s, c), c)
    assert np.max(np.abs(back.q - s.q)) <= 1e-12 and np.max(np.abs(back.p - s.p)) <= 1e-12
    assert np.sum(s.p**2) == pytest.approx(np.sum(to_modes(s, c)[0] ** 2), rel=1e-12)


def test_length_mismatch():
    c = ChainParams.from_modes(3)
    with pytest.raises(InvalidInputError):
        to_modes(LatticeState(np.zeros(5), np.zeros(5)), c)


@pytest.mark.parametrize("boundary", BOUNDARIES)
def test_parseval_random_states(rng, boundary):
    worst = 0.0
    for _ in range(1000):
        N = int(rng.integers(1, 40))
        c = ChainParams.from_modes(N, boundary)
        s = zero_mean_state(rng, c)
        worst = max(worst, abs(mode_energies(s, c).total() / harmonic_energy(s, c) - 1))
    assert worst <= 1e-10


@given(st.integers(1, 30), st.floats(0.01, 2.0), st.sampled_from(BOUNDARIES))
def test_single_mode_energy(N, amp, boundary):
    c = ChainParams.from_modes(N, boundary)
    k = wavenumbers(N, boundary)
    qh = np.zeros(c.sites)
    qh[np.flatnonzero(k == 1)[0]] = amp
    spec = mode_energies(from_modes(np.zeros(c.sites), qh, c), c)
    w1 = 2 * np.sin(np.pi / (2 * (N + 1)))
    e = spec.energy.copy()
    i = np.flatnonzero(spec.k == 1)[0]
    assert e[i] == pytest.approx(w1**2 * amp**2 / 2, rel=1e-12)
    e[i] = 0
    assert np.all(e <= 1e-28)
    assert np.array_equal(spec.specific, spec.energy / N)


def test_zero_state_spectrum():
    c = ChainParams.from_modes(5)
    spec = mode_energies(LatticeState.zeros(c), c)
    assert np.all(spec.energy == 0) and 0 not in spec.k and spec.k.size == c.sites - 1


def make_trace(times, energies):
    energies = np.asarray(energies, dtype=float)
    n = energies.shape[1]
    return EnergyTrace(np.asarray(times, dtype=float), energies, np.arange(1, n + 1), np.ones(n), n)


def test_time_average_constant_and_analytic():
    t = np.linspace(0, 10, 11)
    tr = make_trace(t, np.tile([1.0, 2.0], (11, 1)))
    assert np.allclose(time_average(tr, 7.3), [1.0, 2.0], rtol=1e-15)
    t = np.linspace(0, 2 * np.pi, 20001)
    tr = make_trace(t, np.sin(t)[:, None] ** 2)
    assert time_average(tr, 2 * np.pi)[0] == pytest.approx(0.5, abs=1e-6)


def test_time_average_refinement_invariance():
    f = lambda t: (np.cos(0.3 * t) ** 2 + 0.1 * t)[:, None]
    coarse = np.linspace(0, 20, 4001)
    fine = np.linspace(0, 20, 8001)
    a = time_average(make_trace(coarse, f(coarse)), 17.0)
    b = time_average(make_trace(fine, f(fine)), 17.0)
    assert abs(a[0] - b[0]) <= 1e-6


def test_time_average_range_and_running():
    t = np.arange(5.0)
    tr = make_trace(t, np.arange(5.0)[:, None])
    with pytest.raises(InvalidInputError):
        time_average(tr, 5.5)
    assert time_average(tr, 0.0)[0] == 0.0
    run = running_average(tr)
    assert run[-1, 0] == pytest.approx(2.0) and run[2, 0] == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        make_trace([0.0, 0.0], [[1.0], [1.0]])


def test_packet_fit_exact_flat_noisy(rng):
    k = np.arange(1, 21)
    f = packet_fit(np.exp(-2 * k))
    assert f.sigma == pytest.approx(2.0, rel=1e-12) and f.r2 == pytest.approx(1.0, abs=1e-12)
    assert abs(packet_fit(np.ones(10)).sigma) <= 1e-12
    noisy = np.exp(-0.7 * k) * (1 + 0.1 * rng.uniform(-1, 1, size=k.size))
    assert packet_fit(noisy).sigma == pytest.approx(0.7, rel=0.15)
    with pytest.raises(InsufficientDataError):
        packet_fit([1.0, 0.5, 0.0, 0.1, 0.01])


def test_packet_fit_floor_uses_leading_block():
    y = np.array([1, 0.1, 0.01, 1e-3, 1e-4, 0.0, 1e-6])
    f = packet_fit(y)
    assert f.n_used == 5 and f.sigma == pytest.approx(np.log(10), rel=1e-12)


def test_spectral_entropy_cases():
    e = np.zeros(8)
    e[2] = 1.0
    assert spectral_entropy(e)[1] == pytest.approx(1 / 8)
    assert spectral_entropy(np.ones(8))[1] == pytest.approx(1.0)
    e[5] = 1.0
    S, neff = spectral_entropy(e)
    assert S == pytest.approx(np.log(2)) and neff == pytest.approx(2 / 8)
    with pytest.raises(InvalidInputError):
        spectral_entropy(np.zeros(4))
