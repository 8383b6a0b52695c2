import numpy as np
import pytest

from fpulab.errors import BlowUpError, InvalidInputError
from fpulab.initial import packet_datum, single_mode
from fpulab.integrators import (
    VERLET,
    YOSHIDA4,
    IntegratorConfig,
    evolve,
    evolve_batch,
    reverse_check,
    step,
)
from fpulab.lattice import DIRICHLET, PERIODIC, TODA, ChainParams, LatticeState, energy
from fpulab.spectral import frequencies, mode_energies, to_modes, wavenumbers


def test_config_validation():
    with pytest.raises(InvalidInputError):
        IntegratorConfig(dt=0)
    with pytest.raises(InvalidInputError):
        IntegratorConfig(scheme="rk4")
    with pytest.raises(InvalidInputError):
        IntegratorConfig(stride=0)
    assert IntegratorConfig(dt=0.1, T=1.0).n_steps == 10


def test_yoshida_coefficients():
    from fpulab.integrators import SCHEMES

    w1, w0, w1b = SCHEMES[YOSHIDA4]
    assert w1 == w1b and 2 * w1 + w0 == pytest.approx(1.0, abs=1e-15)
    assert 2 * w1**3 + w0**3 == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("scheme", [VERLET, YOSHIDA4])
def test_zero_state_fixed_point(scheme):
    c = ChainParams(8)
    s = step(LatticeState.zeros(c), c, IntegratorConfig(0.1, scheme))
    assert np.all(s.q == 0) and np.all(s.p == 0) and s.t == pytest.approx(0.1)


@pytest.mark.parametrize("scheme,order", [(VERLET, 3), (YOSHIDA4, 5)])
def test_harmonic_phase_per_step(scheme, order):
    c = ChainParams.from_modes(7, A=0.0)
    amp = 1e-7
    s = single_mode(c, amp, k=2)
    k = wavenumbers(c.N)
    i = np.flatnonzero(k == 2)[0]
    w = float(frequencies(c.N, PERIODIC, 2))
    q0 = to_modes(s, c)[1][i]
    errs = []
    for dt in (0.2, 0.1):
        ph, qh = to_modes(step(s, c, IntegratorConfig(dt, scheme)), c)
        # closed-form oscillator: q(dt) = q0 cos(w dt), p(dt) = -w q0 sin(w dt)
        errs.append(max(abs(qh[i] - q0 * np.cos(w * dt)), abs(ph[i] + w * q0 * np.sin(w * dt))) / abs(q0))
    assert errs[0] / errs[1] == pytest.approx(2**order, rel=0.15)


def test_evolve_sampling_and_observers():
    c = ChainParams.from_modes(7)
    s = single_mode(c, 1e-3)
    seen = []
    tr = evolve(s, c, IntegratorConfig(0.05, T=1.0, stride=4), observers=[lambda st: seen.append(st.t)])
    assert len(tr) == 6 and np.allclose(tr.times, [0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert seen == list(tr.times)
    t0 = evolve(s, c, IntegratorConfig(0.05, T=0.0))
    assert len(t0) == 1 and np.array_equal(t0.q[0], s.q)
    assert np.array_equal(tr.trace.energies[3], mode_energies(tr.state(3), c).energy)


def test_determinism_bitwise():
    c = ChainParams.from_modes(15)
    s = single_mode(c, 1e-2)
    cfg = IntegratorConfig(0.05, T=50, stride=10)
    a = evolve(s, c, cfg)
    b = evolve(s, c, cfg)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.p, b.p)


def test_momentum_conserved_periodic(rng):
    c = ChainParams.from_modes(15, A=1.5)
    q = rng.normal(scale=0.1, size=c.sites)
    p = rng.normal(scale=0.1, size=c.sites)
    tr = evolve(LatticeState(q, p), c, IntegratorConfig(0.05, T=200, stride=100))
    assert np.max(np.abs(tr.p.sum(axis=1) - p.sum())) <= 1e-12


def test_toda_energy_drift():
    c = ChainParams.from_modes(15, model=TODA)
    tr = evolve(single_mode(c, 1e-4), c, IntegratorConfig(0.05, YOSHIDA4, 1e4, 200))
    assert tr.relative_energy_drift().max() <= 1e-8


def one_period_error(scheme, dts, T=64.0):
    c = ChainParams.from_modes(31)
    s = single_mode(c, 1e-2)

    def run(dt, sch):
        tr = evolve(s, c, IntegratorConfig(dt, sch, T, int(round(T / dt))))
        return np.concatenate([tr.q[-1], tr.p[-1]])

    ref = run(0.0025, YOSHIDA4)
    return [np.max(np.abs(run(dt, scheme) - ref)) for dt in dts]


@pytest.mark.parametrize("scheme,order", [(VERLET, 2), (YOSHIDA4, 4)])
def test_convergence_order(scheme, order):
    dts = [0.4, 0.2, 0.1, 0.05]
    errs = one_period_error(scheme, dts)
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(order, rel=0.1)


@pytest.mark.parametrize("scheme", [VERLET, YOSHIDA4])
def test_reversibility(scheme):
    c = ChainParams.from_modes(31)
    assert reverse_check(single_mode(c, 1e-4), c, IntegratorConfig(0.05, scheme, 1e3)) <= 1e-9


def test_blow_up_carries_partial():
    c = ChainParams(4, DIRICHLET, A=-1.0)
    s = LatticeState([3.0, -3.0, 3.0, -3.0], np.zeros(4))
    with pytest.raises(BlowUpError) as info:
        evolve(s, c, IntegratorConfig(0.05, T=100, stride=5))
    err = info.value
    assert err.t is not None and err.t > 0
    assert len(err.partial) >= 1 and err.partial.times[-1] <= err.t
    with pytest.raises(BlowUpError):
        step(LatticeState([1e9, 0, 0, 0], np.zeros(4)), c, IntegratorConfig())


def test_batch_matches_single_and_flags_failures():
    c = ChainParams.from_modes(7)
    s1 = single_mode(c, 1e-3)
    s2 = packet_datum(c, 1.0)
    cfg = IntegratorConfig(0.05, T=5.0, stride=20)
    res = evolve_batch(np.array([s1.q, s2.q]), np.array([s1.p, s2.p]), c, cfg)
    single = evolve(s2, c, cfg)
    assert np.array_equal(res.samples[-1][0][1], single.q[-1])
    assert res.n_failed == 0
    cd = ChainParams(4, DIRICHLET, A=-1.0)
    q0 = np.array([[3.0, -3.0, 3.0, -3.0], [0.01, 0, 0, 0]])
    res = evolve_batch(q0, np.zeros_like(q0), cd, IntegratorConfig(0.05, T=50, stride=10), reducer=lambda q, p: q.sum(axis=1))
    assert list(res.alive) == [False, True] and res.fail_step[0] > 0 and res.n_failed == 1


def test_energy_conserved_short_run():
    c = ChainParams.from_modes(15)
    s = single_mode(c, 1e-3)
    tr = evolve(s, c, IntegratorConfig(0.05, T=100, stride=100))
    assert tr.hamiltonian[0] == pytest.approx(energy(s, c), rel=1e-15)
    assert tr.relative_energy_drift().max() <= 1e-8
