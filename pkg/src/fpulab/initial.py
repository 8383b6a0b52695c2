"""Initial-data builders used by the experiments and tests."""

from __future__ import annotations

import numpy as np

from fpulab.errors import InvalidInputError
from fpulab.lattice import ChainParams, LatticeState
from fpulab.spectral import frequencies, inverse, wavenumbers


def mode_state(params: ChainParams, energies: dict[int, float], phase: float = 0.0) -> LatticeState:
    """State with harmonic energy ``energies[k]`` in mode ``k`` and nothing elsewhere.

    ``phase = 0`` puts all the energy in the displacements; ``phase = pi/2`` in
    the momenta.
    """
    N = params.N
    k_all = wavenumbers(N, params.boundary)
    qh = np.zeros(params.sites)
    ph = np.zeros(params.sites)
    for k, E in energies.items():
        if k == 0 or k not in k_all:
            raise InvalidInputError(f"mode {k} is not a nonzero mode of this chain")
        if E < 0:
            raise InvalidInputError("mode energies must be non-negative")
        i = int(np.flatnonzero(k_all == k)[0])
        w = float(frequencies(N, params.boundary, k))
        amp = np.sqrt(2.0 * E)
        qh[i] = amp * np.cos(phase) / w
        ph[i] = -amp * np.sin(phase)
    return LatticeState(inverse(qh, params), inverse(ph, params))


def single_mode(params: ChainParams, specific_energy: float, k: int = 1, phase: float = 0.0) -> LatticeState:
    """All the energy ``N * specific_energy`` in mode ``k``."""
    return mode_state(params, {k: specific_energy * params.N}, phase)


def packet_datum(params: ChainParams, R: float, mu: float | None = None, phase: float = 0.0) -> LatticeState:
    """Specific energies ``R^2 mu^4`` in modes ``k = +1`` and ``k = -1``, zero elsewhere.

    ``mu`` defaults to ``1/N``.
    """
    mu = params.mu if mu is None else mu
    E = R * R * mu**4 * params.N
    return mode_state(params, {1: E, -1: E}, phase)
