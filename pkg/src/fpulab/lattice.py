"""Chain states, parameters, and the FPU / Toda Hamiltonians.

Conventions
-----------
Internal arrays are 0-based with length ``M``.  For periodic chains the
site label ``j`` (ranging over ``-N-1..N`` with ``M = 2N+2``) is stored at index
``j mod M``; all basis functions are M-periodic so this relabelling is exact.
Dirichlet chains store the ``M`` moving particles; the two fixed end sites
``q_0 = q_{M+1} = 0`` are implicit.

The bond variable is ``r_j = q_j - q_{j+1}`` and the FPU pair potential is

    V(r) = r**2/2 + r**3/6 + A*r**4/24,

which makes ``H_FPU - H_Toda`` start at fourth order when ``A = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fpulab.errors import DomainError, InvalidInputError

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
FPU = "fpu"
TODA = "toda"

EXP_GUARD = 700.0


@dataclass(frozen=True)
class ChainParams:
    """Static description of a chain.

    Attributes:
        sites: number of stored particles ``M``.
        boundary: ``"periodic"`` or ``"dirichlet"``.
        A: quartic coupling of the FPU potential.
        model: ``"fpu"`` or ``"toda"``; selects the force law used by integrators.
    """

    sites: int
    boundary: str = PERIODIC
    A: float = 1.0
    model: str = FPU

    def __post_init__(self):
        if self.boundary not in (PERIODIC, DIRICHLET):
            raise InvalidInputError(f"unknown boundary {self.boundary!r}")
        if self.model not in (FPU, TODA):
            raise InvalidInputError(f"unknown model {self.model!r}")
        if int(self.sites) != self.sites:
            raise InvalidInputError("sites must be an integer")
        minimum = 2 if self.boundary == PERIODIC else 1
        if self.sites < minimum:
            raise InvalidInputError(f"{self.boundary} chain needs at least {minimum} sites")
        if not np.isfinite(self.A):
            raise InvalidInputError("A must be finite")

    @classmethod
    def from_modes(cls, N: int, boundary: str = PERIODIC, **kw) -> "ChainParams":
        """Chain whose Fourier basis has mode index ``N`` (M = 2N+2 or M = N)."""
        sites = 2 * N + 2 if boundary == PERIODIC else N
        return cls(sites=sites, boundary=boundary, **kw)

    @property
    def N(self) -> int:
        """Mode index: ``M = 2N+2`` (periodic) or ``M = N`` (Dirichlet)."""
        if self.boundary == DIRICHLET:
            return self.sites
        if self.sites % 2:
            raise InvalidInputError("periodic Fourier indexing needs an even number of sites")
        return self.sites // 2 - 1

    @property
    def mu(self) -> float:
        return 1.0 / self.N

    @property
    def n_bonds(self) -> int:
        return self.sites if self.boundary == PERIODIC else self.sites + 1

    def with_model(self, model: str, A: float | None = None) -> "ChainParams":
        return replace(self, model=model, A=self.A if A is None else A)


@dataclass(frozen=True)
class LatticeState:
    """Phase-space point ``(q, p)`` at time ``t``.  Arrays are copied and made read-only."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        p = np.array(self.p, dtype=float)
        if q.shape != p.shape:
            raise InvalidInputError(f"q shape {q.shape} differs from p shape {p.shape}")
        if q.ndim != 1:
            raise InvalidInputError("q and p must be one-dimensional")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def zeros(cls, params: ChainParams) -> "LatticeState":
        return cls(np.zeros(params.sites), np.zeros(params.sites))

    def __len__(self):
        return self.q.shape[0]

    def max_norm(self) -> float:
        return float(max(np.max(np.abs(self.q), initial=0.0), np.max(np.abs(self.p), initial=0.0)))


def _check(state: LatticeState, params: ChainParams, model: str | None = None):
    if len(state) != params.sites:
        raise InvalidInputError(f"state has {len(state)} sites, params expect {params.sites}")
    if model is not None and params.model != model:
        raise InvalidInputError(f"operation requires model={model!r}, got {params.model!r}")


def bonds(q: np.ndarray, boundary: str) -> np.ndarray:
    """Bond variables ``r_j = q_j - q_{j+1}`` along the last axis.

    Periodic chains have ``M`` bonds, Dirichlet chains ``M + 1`` (including both walls).
    """
    q = np.asarray(q, dtype=float)
    if boundary == PERIODIC:
        return q - np.roll(q, -1, axis=-1)
    pad = [(0, 0)] * (q.ndim - 1) + [(1, 1)]
    qq = np.pad(q, pad)
    return qq[..., :-1] - qq[..., 1:]


def _bond_divergence(f: np.ndarray, boundary: str) -> np.ndarray:
    # force_j = f(r_{j-1}) - f(r_j)
    if boundary == PERIODIC:
        return np.roll(f, 1, axis=-1) - f
    return f[..., :-1] - f[..., 1:]


def fpu_potential(r, A):
    return r * r / 2 + r**3 / 6 + A * r**4 / 24


def fpu_dpotential(r, A):
    return r + r * r / 2 + A * r**3 / 6


def _guard_exp(r: np.ndarray) -> np.ndarray:
    bad = np.abs(r) > EXP_GUARD
    if np.any(bad):
        site = int(np.flatnonzero(bad.reshape(-1))[0] % r.shape[-1])
        raise DomainError(f"bond {site} has |r| = {np.abs(r).reshape(-1)[bad.reshape(-1)][0]:.3g} > {EXP_GUARD}; exp would overflow")
    return np.exp(r)


def fpu_energy_arrays(q, p, A, boundary) -> np.ndarray:
    r = bonds(q, boundary)
    return 0.5 * np.sum(np.asarray(p) ** 2, axis=-1) + np.sum(fpu_potential(r, A), axis=-1)


def toda_energy_arrays(q, p, boundary) -> np.ndarray:
    r = bonds(q, boundary)
    return 0.5 * np.sum(np.asarray(p) ** 2, axis=-1) + np.sum(_guard_exp(r), axis=-1)


def fpu_energy(state: LatticeState, params: ChainParams) -> float:
    """``H = sum_j p_j^2/2 + V(r_j)`` for the FPU chain."""
    _check(state, params, FPU)
    return float(fpu_energy_arrays(state.q, state.p, params.A, params.boundary))


def fpu_forces(state: LatticeState, params: ChainParams) -> np.ndarray:
    """Accelerations ``-dH/dq_j = V'(r_{j-1}) - V'(r_j)``."""
    _check(state, params, FPU)
    r = bonds(state.q, params.boundary)
    return _bond_divergence(fpu_dpotential(r, params.A), params.boundary)


def toda_energy(state: LatticeState, params: ChainParams) -> float:
    """``H = sum_j p_j^2/2 + exp(r_j)``.  Raises DomainError if some ``|r_j| > 700``."""
    _check(state, params, TODA)
    return float(toda_energy_arrays(state.q, state.p, params.boundary))


def toda_forces(state: LatticeState, params: ChainParams) -> np.ndarray:
    _check(state, params, TODA)
    r = bonds(state.q, params.boundary)
    return _bond_divergence(_guard_exp(r), params.boundary)


def energy(state: LatticeState, params: ChainParams) -> float:
    """Hamiltonian of whichever model ``params`` selects."""
    return fpu_energy(state, params) if params.model == FPU else toda_energy(state, params)


def forces(state: LatticeState, params: ChainParams) -> np.ndarray:
    return fpu_forces(state, params) if params.model == FPU else toda_forces(state, params)


def harmonic_energy(state: LatticeState, params: ChainParams) -> float:
    """Quadratic part ``H_0 = sum p^2/2 + r^2/2``."""
    _check(state, params)
    r = bonds(state.q, params.boundary)
    return float(0.5 * np.sum(state.p**2) + 0.5 * np.sum(r**2))


def toda_fpu_gap(state: LatticeState, params: ChainParams) -> float:
    """``H_FPU - H_Toda + M`` on a periodic chain.

    Since ``sum r_j = 0`` the constant and linear parts of ``exp(r)`` cancel, leaving
    ``(A-1) sum r^4/24 - sum_{l>=5} sum r^l/l!``.  The remainder is evaluated as
    ``expm1``-based differences so it stays accurate for tiny amplitudes.
    """
    _check(state, params)
    if params.boundary != PERIODIC:
        raise InvalidInputError("toda_fpu_gap needs a periodic chain (sum of bonds must vanish)")
    r = bonds(state.q, PERIODIC)
    _guard_exp(r)
    # exp(r) - (1 + r + r^2/2 + r^3/6 + r^4/24), cancellation-free for small r
    tail = _exp_tail5(r)
    return float((params.A - 1.0) * np.sum(r**4) / 24 - np.sum(tail))


def _exp_tail5(r: np.ndarray) -> np.ndarray:
    """``sum_{l>=5} r^l / l!`` without catastrophic cancellation."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = np.abs(r) < 0.5
    rs = r[small]
    term = rs**5 / 120.0
    acc = term.copy()
    for l in range(6, 40):
        term = term * rs / l
        acc += term
    out[small] = acc
    rb = r[~small]
    out[~small] = np.expm1(rb) - (rb + rb**2 / 2 + rb**3 / 6 + rb**4 / 24)
    return out


def project_zero_mean(state: LatticeState) -> LatticeState:
    """Remove the centre-of-mass displacement and momentum (periodic invariant submanifold)."""
    return LatticeState(_remove_mean(state.q), _remove_mean(state.p), state.t)


def _remove_mean(x: np.ndarray) -> np.ndarray:
    m = np.mean(x)
    # residual means left by rounding are not re-subtracted, so projection is bitwise idempotent
    if abs(m) <= 64 * np.finfo(float).eps * np.max(np.abs(x), initial=0.0):
        return x
    return x - m
