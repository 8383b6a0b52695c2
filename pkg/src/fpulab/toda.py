"""Toda integrability diagnostics: Flaschka variables, Lax spectra, action proxies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fpulab.errors import DomainError, InvalidInputError, NumericalError
from fpulab.lattice import EXP_GUARD, PERIODIC, ChainParams, LatticeState, bonds
from fpulab.spectral import ModeSpectrum, frequencies, mode_energy_arrays, nonzero_wavenumbers, to_modes, wavenumbers


@dataclass(frozen=True)
class FlaschkaState:
    """``a_j = exp(r_j/2)/2`` and ``b_j = -p_j/2`` (arrays may carry leading batch axes)."""

    a: np.ndarray
    b: np.ndarray

    def bonds(self) -> np.ndarray:
        """Recover ``r_j = 2 log(2 a_j)``."""
        return 2.0 * np.log(2.0 * self.a)


@dataclass(frozen=True)
class LaxSpectra:
    """Sorted eigenvalues of the periodic (``plus``) and antiperiodic (``minus``) Lax matrices."""

    plus: np.ndarray
    minus: np.ndarray


def _flaschka_arrays(q, p) -> FlaschkaState:
    r = bonds(q, PERIODIC)
    if np.any(np.abs(r) > EXP_GUARD):
        site = int(np.argmax(np.abs(r)) % r.shape[-1])
        raise DomainError(f"bond {site} exceeds the exp guard |r| <= {EXP_GUARD}")
    return FlaschkaState(0.5 * np.exp(0.5 * r), -0.5 * np.asarray(p, dtype=float))


def flaschka(state: LatticeState, params: ChainParams) -> FlaschkaState:
    if params.boundary != PERIODIC:
        raise InvalidInputError("Flaschka variables are defined here for periodic chains")
    if len(state) != params.sites:
        raise InvalidInputError(f"state has {len(state)} sites, params expect {params.sites}")
    return _flaschka_arrays(state.q, state.p)


def lax_matrix(fl: FlaschkaState, sign: int = 1) -> np.ndarray:
    """Symmetric Jacobi matrix with corner entries ``sign * a_{M-1}``."""
    a = np.asarray(fl.a)
    b = np.asarray(fl.b)
    M = b.shape[-1]
    L = np.zeros(b.shape + (M,))
    i = np.arange(M)
    L[..., i, i] = b
    L[..., i[:-1], i[1:]] += a[..., :-1]
    L[..., i[1:], i[:-1]] += a[..., :-1]
    L[..., M - 1, 0] += sign * a[..., M - 1]
    L[..., 0, M - 1] += sign * a[..., M - 1]
    return L


def _eigvalsh(L: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(L)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(L.reshape((-1,) + L.shape[-2:])).max()
        raise NumericalError(f"Lax eigensolver failed (condition number ~{cond:.3g})") from exc


def lax_spectra(fl: FlaschkaState) -> LaxSpectra:
    return LaxSpectra(_eigvalsh(lax_matrix(fl, +1)), _eigvalsh(lax_matrix(fl, -1)))


def spectrum_drift(q_snapshots, p_snapshots, params: ChainParams, include_minus: bool = False) -> np.ndarray:
    """``max_k |lambda_k(t) - lambda_k(0)|`` per snapshot, eigenvalues matched in sorted order."""
    if params.boundary != PERIODIC:
        raise InvalidInputError("spectrum drift needs a periodic chain")
    q = np.atleast_2d(np.asarray(q_snapshots, dtype=float))
    p = np.atleast_2d(np.asarray(p_snapshots, dtype=float))
    if q.shape != p.shape or q.shape[-1] != params.sites:
        raise InvalidInputError("snapshot arrays must be (n_times, M)")
    spec = lax_spectra(_flaschka_arrays(q, p))
    drift = np.max(np.abs(spec.plus - spec.plus[0]), axis=-1)
    if include_minus:
        drift = np.maximum(drift, np.max(np.abs(spec.minus - spec.minus[0]), axis=-1))
    return drift


def linear_actions(spectrum: ModeSpectrum) -> np.ndarray:
    """``I_k = E_k / omega_k``: Toda Birkhoff actions to leading order at the origin."""
    if np.any(spectrum.omega <= 0):
        raise InvalidInputError("linear actions need strictly positive frequencies")
    return spectrum.energy / spectrum.omega


def linear_birkhoff(state: LatticeState, params: ChainParams):
    """``X_k = p_hat_k / sqrt(omega_k)``, ``Y_k = sqrt(omega_k) q_hat_k`` for the nonzero modes."""
    ph, qh = to_modes(state, params)
    mask = wavenumbers(params.N, params.boundary) != 0
    w = frequencies(params.N, params.boundary)
    return ph[mask] / np.sqrt(w), np.sqrt(w) * qh[mask]


def _weights(params: ChainParams, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    k = np.abs(nonzero_wavenumbers(params.N, params.boundary))
    if 2 * sigma * k.max() > 700:
        raise DomainError(f"exp(2*sigma*|k|) overflows for sigma={sigma}, N={params.N}")
    use = k <= params.N
    return np.where(use, np.exp(2 * sigma * k), 0.0), use


def sigma_norm(state: LatticeState, params: ChainParams, sigma: float) -> float:
    """Weighted norm ``sqrt((1/N) sum_{1<=|k|<=N} e^{2 sigma |k|} omega_k (X_k^2 + Y_k^2)/2)``."""
    w, _ = _weights(params, sigma)
    X, Y = linear_birkhoff(state, params)
    omega = frequencies(params.N, params.boundary)
    return float(np.sqrt(np.sum(w * omega * (X**2 + Y**2) / 2) / params.N))


def weighted_action_drift(q_snapshots, p_snapshots, params: ChainParams, sigma: float) -> np.ndarray:
    """``(1/N) sum_{1<=|k|<=N} e^{2 sigma |k|} omega_k |I_k(t) - I_k(0)|`` with ``I_k = E_k/omega_k``."""
    w, _ = _weights(params, sigma)
    E = mode_energy_arrays(np.atleast_2d(q_snapshots), np.atleast_2d(p_snapshots), params)
    return np.abs(E - E[0]) @ w / params.N
