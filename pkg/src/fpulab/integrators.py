"""Symplectic time stepping for the FPU and Toda chains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fpulab import _kernels
from fpulab.errors import BlowUpError, InvalidInputError
from fpulab.lattice import FPU, PERIODIC, ChainParams, LatticeState, fpu_energy_arrays, toda_energy_arrays
from fpulab.spectral import EnergyTrace, frequencies, mode_energy_arrays, nonzero_wavenumbers

VERLET = "verlet"
YOSHIDA4 = "yoshida4"

_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
SCHEMES = {
    VERLET: np.array([1.0]),
    YOSHIDA4: np.array([_W1, _W0, _W1]),
}
ORDERS = {VERLET: 2, YOSHIDA4: 4}


@dataclass(frozen=True)
class IntegratorConfig:
    """Time step, scheme, horizon, and sampling stride (in steps)."""

    dt: float = 0.05
    scheme: str = YOSHIDA4
    T: float = 0.0
    stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise InvalidInputError("stride must be a positive integer")
        if self.T < 0:
            raise InvalidInputError("T must be non-negative")

    @property
    def n_steps(self) -> int:
        """Whole steps that fit in ``T`` (a trailing fraction below ``1e-9*dt`` counts)."""
        return int(np.floor(self.T / self.dt + 1e-9))


def _codes(params: ChainParams):
    model = _kernels.MODEL_FPU if params.model == FPU else _kernels.MODEL_TODA
    return model, params.boundary == PERIODIC


def advance_arrays(q, p, params: ChainParams, dt: float, n_steps: int, scheme: str = YOSHIDA4, alive=None):
    """Advance a batch ``(B, M)`` in place.  Returns ``(alive, fail_step)`` arrays."""
    model, periodic = _codes(params)
    B = q.shape[0]
    alive = np.ones(B, dtype=np.bool_) if alive is None else alive
    fail = np.full(B, -1, dtype=np.int64)
    _kernels.advance(q, p, float(dt), int(n_steps), SCHEMES[scheme], model, periodic, float(params.A), alive, fail)
    return alive, fail


def _validate(state: LatticeState, params: ChainParams):
    if len(state) != params.sites:
        raise InvalidInputError(f"state has {len(state)} sites, params expect {params.sites}")


def step(state: LatticeState, params: ChainParams, config: IntegratorConfig) -> LatticeState:
    """One velocity-Verlet or Yoshida-4 step of size ``config.dt``."""
    _validate(state, params)
    q = state.q.copy()[None, :]
    p = state.p.copy()[None, :]
    alive, _ = advance_arrays(q, p, params, config.dt, 1, config.scheme)
    t = state.t + config.dt
    if not alive[0]:
        raise BlowUpError(f"state became non-finite at t={t:.6g}", t=t)
    return LatticeState(q[0], p[0], t)


@dataclass
class Trajectory:
    """Sampled trajectory: times, positions, momenta, and the Hamiltonian at each sample."""

    params: ChainParams
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    hamiltonian: np.ndarray
    _trace: EnergyTrace | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> LatticeState:
        return LatticeState(self.q[i], self.p[i], self.times[i])

    def states(self):
        return (self.state(i) for i in range(len(self)))

    @property
    def trace(self) -> EnergyTrace:
        if self._trace is None:
            P = self.params
            self._trace = EnergyTrace(
                times=self.times,
                energies=mode_energy_arrays(self.q, self.p, P),
                k=nonzero_wavenumbers(P.N, P.boundary),
                omega=frequencies(P.N, P.boundary),
                N=P.N,
            )
        return self._trace

    def relative_energy_drift(self) -> np.ndarray:
        h0 = self.hamiltonian[0]
        return np.abs(self.hamiltonian - h0) / abs(h0)


Observer = Callable[[LatticeState], None]


def evolve(
    state: LatticeState,
    params: ChainParams,
    config: IntegratorConfig,
    observers: Sequence[Observer] = (),
) -> Trajectory:
    """Integrate to ``config.T``, sampling every ``config.stride`` steps.

    The initial state is always the first sample.  Observers are called with
    every sampled state, in order.  On blow-up a :class:`BlowUpError` is raised
    whose ``partial`` attribute holds the trajectory up to the last good sample.
    """
    _validate(state, params)
    n_total = config.n_steps
    q = state.q.copy()[None, :]
    p = state.p.copy()[None, :]
    times, qs, ps = [state.t], [q[0].copy()], [p[0].copy()]
    for obs in observers:
        obs(state)
    done = 0
    while done < n_total:
        chunk = min(config.stride, n_total - done)
        alive, fail = advance_arrays(q, p, params, config.dt, chunk, config.scheme)
        if not alive[0]:
            t_fail = state.t + (done + max(int(fail[0]), 1)) * config.dt
            partial = _make_trajectory(params, times, qs, ps)
            raise BlowUpError(f"trajectory blew up near t={t_fail:.6g}", t=t_fail, partial=partial)
        done += chunk
        t = state.t + done * config.dt
        times.append(t)
        qs.append(q[0].copy())
        ps.append(p[0].copy())
        if observers:
            snap = LatticeState(qs[-1], ps[-1], t)
            for obs in observers:
                obs(snap)
    return _make_trajectory(params, times, qs, ps)


def _make_trajectory(params, times, qs, ps) -> Trajectory:
    q = np.array(qs)
    p = np.array(ps)
    return Trajectory(params, np.array(times), q, p, hamiltonian_arrays(q, p, params))


def hamiltonian_arrays(q, p, params: ChainParams) -> np.ndarray:
    if params.model == FPU:
        return fpu_energy_arrays(q, p, params.A, params.boundary)
    return toda_energy_arrays(q, p, params.boundary)


@dataclass
class BatchResult:
    """Output of :func:`evolve_batch`: sample times, reduced samples, survivors."""

    times: np.ndarray
    samples: list
    alive: np.ndarray
    fail_step: np.ndarray

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(~self.alive))


def evolve_batch(
    q0: np.ndarray,
    p0: np.ndarray,
    params: ChainParams,
    config: IntegratorConfig,
    reducer: Callable[[np.ndarray, np.ndarray], object] | None = None,
) -> BatchResult:
    """Evolve independent trajectories stored as rows of ``(B, M)`` arrays.

    ``reducer(q, p)`` is applied at every sample (default: copies of q and p).
    Trajectories that blow up are frozen and reported through ``alive``; the
    caller decides whether to exclude or abort.
    """
    q = np.array(q0, dtype=float, copy=True)
    p = np.array(p0, dtype=float, copy=True)
    if q.ndim != 2 or q.shape != p.shape or q.shape[1] != params.sites:
        raise InvalidInputError("batch arrays must be (B, M) with matching shapes")
    reducer = reducer or (lambda a, b: (a.copy(), b.copy()))
    alive = np.ones(q.shape[0], dtype=np.bool_)
    fail = np.full(q.shape[0], -1, dtype=np.int64)
    times = [0.0]
    samples = [reducer(q, p)]
    done = 0
    while done < config.n_steps:
        chunk = min(config.stride, config.n_steps - done)
        was_alive = alive.copy()
        _, f = advance_arrays(q, p, params, config.dt, chunk, config.scheme, alive=alive)
        newly = was_alive & ~alive
        fail[newly] = done + f[newly]
        done += chunk
        times.append(done * config.dt)
        samples.append(reducer(q, p))
    return BatchResult(np.array(times), samples, alive, fail)


def reverse_check(state: LatticeState, params: ChainParams, config: IntegratorConfig) -> float:
    """Max-norm distance after integrating ``T`` forward and ``T`` back (momenta flipped)."""
    fwd = evolve(state, params, IntegratorConfig(config.dt, config.scheme, config.T, max(config.n_steps, 1)))
    end = fwd.state(-1)
    back = evolve(LatticeState(end.q, -end.p), params, IntegratorConfig(config.dt, config.scheme, config.T, max(config.n_steps, 1)))
    fin = back.state(-1)
    return float(max(np.max(np.abs(fin.q - state.q)), np.max(np.abs(-fin.p - state.p))))

