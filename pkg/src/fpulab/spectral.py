"""Normal-mode machinery: Fourier basis, transforms, harmonic energies, averages.

Periodic chains (``M = 2N+2``) use
``k = -N-1, ..., N``: sines for ``k = 1..N``, cosines for ``k = -1..-N``, the
constant vector for ``k = 0`` and the alternating vector for ``k = -N-1``.
Coefficient arrays are ordered by increasing ``k``.  Dirichlet chains use the
sine basis with ``k = 1..N``.

The ``k = 0`` (centre of mass) coefficient has zero frequency; it is carried by
the transforms but excluded from :class:`ModeSpectrum`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from fpulab.errors import InsufficientDataError, InvalidInputError
from fpulab.lattice import DIRICHLET, PERIODIC, ChainParams, LatticeState


def wavenumbers(N: int, boundary: str = PERIODIC) -> np.ndarray:
    """Mode labels in storage order (``k = 0`` included for periodic chains)."""
    if N < 1:
        raise InvalidInputError("N must be >= 1")
    if boundary == PERIODIC:
        return np.arange(-N - 1, N + 1)
    return np.arange(1, N + 1)


def frequencies(N: int, boundary: str = PERIODIC, k=None) -> np.ndarray:
    """``omega_k = 2 sin(|k| pi / (2(N+1)))``.

    Without ``k`` this returns the frequencies of the nonzero modes in storage
    order, i.e. the ones a :class:`ModeSpectrum` carries.
    """
    if N < 1:
        raise InvalidInputError("N must be >= 1")
    if k is None:
        k = nonzero_wavenumbers(N, boundary)
    return 2.0 * np.sin(np.abs(np.asarray(k)) * np.pi / (2 * (N + 1)))


def nonzero_wavenumbers(N: int, boundary: str = PERIODIC) -> np.ndarray:
    k = wavenumbers(N, boundary)
    return k[k != 0]


@lru_cache(maxsize=32)
def _basis(N: int, boundary: str) -> np.ndarray:
    if boundary == PERIODIC:
        M = 2 * N + 2
        j = np.arange(M)[None, :]
        k = wavenumbers(N, boundary)[:, None]
        B = np.empty((M, M))
        ang = j * np.abs(k) * np.pi / (N + 1)
        pos = (k > 0)[:, 0]
        neg = ((k < 0) & (k > -N - 1))[:, 0]
        B[pos] = np.sin(ang[pos]) / np.sqrt(N + 1)
        B[neg] = np.cos(ang[neg]) / np.sqrt(N + 1)
        B[N + 1] = 1.0 / np.sqrt(M)
        B[0] = (-1.0) ** np.arange(M) / np.sqrt(M)
    else:
        j = np.arange(1, N + 1)[None, :]
        k = np.arange(1, N + 1)[:, None]
        B = np.sqrt(2.0 / (N + 1)) * np.sin(j * k * np.pi / (N + 1))
    B.setflags(write=False)
    return B


def basis_matrix(params: ChainParams) -> np.ndarray:
    """Rows are the basis vectors ``e_k`` in storage order; the matrix is orthogonal."""
    return _basis(params.N, params.boundary)


def forward(x: np.ndarray, params: ChainParams, method: str = "fast") -> np.ndarray:
    """Mode coefficients of site data ``x`` (transform along the last axis)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.sites:
        raise InvalidInputError(f"expected {params.sites} sites, got {x.shape[-1]}")
    if method == "direct":
        return x @ basis_matrix(params).T
    if params.boundary == DIRICHLET:
        return scipy.fft.dst(x, type=1, norm="ortho", axis=-1)
    N = params.N
    M = params.sites
    X = np.fft.rfft(x, axis=-1)
    out = np.empty(x.shape)
    s = np.sqrt(2.0 / M)
    out[..., N + 2 :] = -X[..., 1 : N + 1].imag * s
    out[..., N : 0 : -1] = X[..., 1 : N + 1].real * s
    out[..., N + 1] = X[..., 0].real / np.sqrt(M)
    out[..., 0] = X[..., N + 1].real / np.sqrt(M)
    return out


def inverse(c: np.ndarray, params: ChainParams, method: str = "fast") -> np.ndarray:
    """Site data from mode coefficients; inverse of :func:`forward`."""
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != params.sites:
        raise InvalidInputError(f"expected {params.sites} coefficients, got {c.shape[-1]}")
    if method == "direct":
        return c @ basis_matrix(params)
    if params.boundary == DIRICHLET:
        return scipy.fft.idst(c, type=1, norm="ortho", axis=-1)
    N = params.N
    M = params.sites
    X = np.empty(c.shape[:-1] + (N + 2,), dtype=complex)
    h = np.sqrt(M / 2.0)
    X[..., 1 : N + 1] = h * (c[..., N : 0 : -1] - 1j * c[..., N + 2 :])
    X[..., 0] = c[..., N + 1] * np.sqrt(M)
    X[..., N + 1] = c[..., 0] * np.sqrt(M)
    return np.fft.irfft(X, n=M, axis=-1)


def to_modes(state: LatticeState, params: ChainParams, method: str = "fast"):
    """Return ``(p_hat, q_hat)`` with ``p_j = sum_k p_hat_k e_k(j)``."""
    if len(state) != params.sites:
        raise InvalidInputError(f"state has {len(state)} sites, params expect {params.sites}")
    return forward(state.p, params, method), forward(state.q, params, method)


def from_modes(p_hat, q_hat, params: ChainParams, t: float = 0.0, method: str = "fast") -> LatticeState:
    return LatticeState(inverse(q_hat, params, method), inverse(p_hat, params, method), t)


def _nonzero_mask(params: ChainParams) -> np.ndarray:
    return wavenumbers(params.N, params.boundary) != 0


@dataclass(frozen=True)
class ModeSpectrum:
    """Harmonic energies of the nonzero modes of one state."""

    k: np.ndarray
    omega: np.ndarray
    energy: np.ndarray
    N: int
    t: float = 0.0

    @property
    def specific(self) -> np.ndarray:
        """``E_k / N``."""
        return self.energy / self.N

    def total(self) -> float:
        return float(np.sum(self.energy))

    def by_abs_k(self):
        return fold_abs_k(self.k, self.energy)


def mode_energy_arrays(q, p, params: ChainParams) -> np.ndarray:
    """``E_k = (p_hat_k^2 + omega_k^2 q_hat_k^2) / 2`` along the last axis, nonzero modes only."""
    mask = _nonzero_mask(params)
    ph = forward(p, params)[..., mask]
    qh = forward(q, params)[..., mask]
    w = frequencies(params.N, params.boundary)
    return 0.5 * (ph**2 + (w * qh) ** 2)


def mode_energies(state: LatticeState, params: ChainParams) -> ModeSpectrum:
    """Harmonic energy spectrum of ``state``.

    On the zero-mean submanifold the energies sum to ``H_0``; otherwise the
    centre-of-mass kinetic energy ``p_hat_0^2/2`` is the missing difference.
    """
    if len(state) != params.sites:
        raise InvalidInputError(f"state has {len(state)} sites, params expect {params.sites}")
    return ModeSpectrum(
        k=nonzero_wavenumbers(params.N, params.boundary),
        omega=frequencies(params.N, params.boundary),
        energy=mode_energy_arrays(state.q, state.p, params),
        N=params.N,
        t=state.t,
    )


def fold_abs_k(k, values):
    """Sum entries sharing ``|k|``; returns ``(abs_k, folded)`` sorted by ``|k|``."""
    k = np.abs(np.asarray(k))
    values = np.asarray(values)
    labels = np.unique(k)
    out = np.zeros(values.shape[:-1] + (labels.size,))
    for i, lab in enumerate(labels):
        out[..., i] = values[..., k == lab].sum(axis=-1)
    return labels, out


@dataclass(frozen=True)
class EnergyTrace:
    """Per-mode harmonic energies sampled along a trajectory (rows are times)."""

    times: np.ndarray
    energies: np.ndarray
    k: np.ndarray
    omega: np.ndarray
    N: int

    def __post_init__(self):
        if self.energies.shape != (len(self.times), len(self.k)):
            raise InvalidInputError("energies must be (n_times, n_modes)")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise InvalidInputError("sample times must be strictly increasing")

    @property
    def specific(self) -> np.ndarray:
        return self.energies / self.N

    def mode(self, k: int) -> np.ndarray:
        idx = np.flatnonzero(self.k == k)
        if idx.size == 0:
            raise InvalidInputError(f"mode {k} not present")
        return self.energies[:, idx[0]]


def time_average(trace: EnergyTrace, T: float) -> np.ndarray:
    """``<E_k>(T)``: trapezoidal average of the samples over ``[t_0, T]``.

    ``T`` need not be a sample time; the trace is linearly interpolated there.
    """
    t = trace.times
    if not (t[0] <= T <= t[-1] + 1e-12 * max(1.0, abs(t[-1]))):
        raise InvalidInputError(f"T={T} outside trace range [{t[0]}, {t[-1]}]")
    T = min(T, t[-1])
    if T == t[0]:
        return trace.energies[0].copy()
    n = np.searchsorted(t, T, side="right")
    ts = t[:n]
    es = trace.energies[:n]
    if ts[-1] < T:
        w = (T - ts[-1]) / (t[n] - ts[-1])
        ts = np.append(ts, T)
        es = np.vstack([es, (1 - w) * trace.energies[n - 1] + w * trace.energies[n]])
    return np.trapezoid(es, ts, axis=0) / (T - t[0])


def running_average(trace: EnergyTrace) -> np.ndarray:
    """``<E_k>(t_i)`` at every sample time (first row equals the first sample)."""
    t = trace.times
    e = trace.energies
    if len(t) == 1:
        return e.copy()
    seg = 0.5 * (e[1:] + e[:-1]) * np.diff(t)[:, None]
    cum = np.vstack([np.zeros(e.shape[1]), np.cumsum(seg, axis=0)])
    out = e.copy()
    out[1:] = cum[1:] / (t[1:] - t[0])[:, None]
    return out


@dataclass(frozen=True)
class PacketFit:
    sigma: float
    r2: float
    intercept: float
    n_used: int


def packet_fit(averages, k=None, floor: float = 1e-300) -> PacketFit:
    """Exponential decay rate of a mode-energy profile.

    Fits ``log E_k = c - sigma*k`` by least squares over the contiguous leading
    block of entries above ``floor``.  ``k`` defaults to ``1, 2, ...``.
    """
    y = np.asarray(averages, dtype=float)
    x = np.arange(1, y.size + 1, dtype=float) if k is None else np.asarray(k, dtype=float)
    above = y > floor
    n = y.size if above.all() else int(np.argmin(above))
    if n < 4:
        raise InsufficientDataError(f"need at least 4 leading entries above {floor}, have {n}")
    x, ly = x[:n], np.log(y[:n])
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return PacketFit(sigma=float(-slope), r2=r2, intercept=float(intercept), n_used=n)


def spectral_entropy(spectrum) -> tuple[float, float]:
    """Shannon entropy of normalised energies and ``n_eff = exp(S) / n_modes``."""
    e = spectrum.energy if isinstance(spectrum, ModeSpectrum) else np.asarray(spectrum, dtype=float)
    total = np.sum(e)
    if not total > 0:
        raise InvalidInputError("spectral entropy needs a positive total energy")
    w = e / total
    w = w[w > 0]
    S = float(-np.sum(w * np.log(w)))
    return S, float(np.exp(S) / e.size)
