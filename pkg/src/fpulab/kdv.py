"""Periodic KdV solver and the KdV-to-lattice modulation bridge.

The solver integrates ``f_tau + a f_yyy + b f f_y = 0`` on the period-2 interval
with a Fourier pseudo-spectral discretisation: the dispersive term is propagated
exactly (integrating factor), the nonlinearity is advanced with RK4 and
dealiased with the 2/3 rule.  ``a = b = 1`` is the normalised equation.

For the lattice, ``r_j = mu^2 [f(mu(j - t), mu^3 t) + g(-mu(j + t), mu^3 t)]``
where both profiles solve the KdV equation obtained from the chain's equations
of motion with ``V'(r) = r + r^2/2 + ...``, i.e. ``a = 1/24`` and ``b = 1/2``.
The lattice spacing is ``mu = 2/M`` so that the period-2 profile closes on the
ring of ``M`` sites.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from fpulab.errors import InvalidInputError, StabilityError
from fpulab.lattice import PERIODIC, ChainParams, LatticeState, bonds

PERIOD = 2.0
LATTICE_DISPERSION = 1.0 / 24.0
LATTICE_NONLINEARITY = 0.5
MIN_GRID = 32


@dataclass(frozen=True)
class KdVField:
    """Profile sampled on ``y_i = 2 i / n``, ``i = 0..n-1``, at KdV time ``tau``."""

    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = v.size
        if v.ndim != 1 or n < MIN_GRID or n & (n - 1):
            raise InvalidInputError(f"grid size must be a power of two >= {MIN_GRID}, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func, n: int = 256, tau: float = 0.0) -> "KdVField":
        return cls(func(grid(n)), tau)

    @classmethod
    def from_spectrum(cls, coeffs: np.ndarray, n: int, tau: float = 0.0) -> "KdVField":
        return cls(np.fft.irfft(coeffs, n=n), tau)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def spectrum(self) -> np.ndarray:
        return np.fft.rfft(self.values)

    def mass(self) -> float:
        """``integral f dy`` over one period."""
        return float(PERIOD * np.mean(self.values))

    def momentum(self) -> float:
        """``integral f^2 dy`` over one period (exact for band-limited data)."""
        return float(PERIOD * np.mean(self.values**2))

    def __call__(self, y) -> np.ndarray:
        return evaluate(self.spectrum, self.n, y)


def grid(n: int) -> np.ndarray:
    return PERIOD * np.arange(n) / n


def wavenumbers(n: int) -> np.ndarray:
    """Angular wavenumbers ``pi m`` of the rfft coefficients."""
    return np.pi * np.arange(n // 2 + 1)


def dealias_mask(n: int) -> np.ndarray:
    m = np.arange(n // 2 + 1)
    return m <= n // 3


def evaluate(coeffs: np.ndarray, n: int, y) -> np.ndarray:
    """Trigonometric interpolant of rfft coefficients at arbitrary points ``y``."""
    y = np.asarray(y, dtype=float)
    m = np.arange(coeffs.size)
    c = coeffs.copy()
    if n % 2 == 0:
        # the Nyquist coefficient is real and counted once
        c[-1] = 0.5 * c[-1]
    phase = np.exp(1j * np.pi * np.multiply.outer(y, m[1:]))
    return (c[0].real + 2.0 * (phase @ c[1:]).real) / n


def derivative(coeffs: np.ndarray, n: int, order: int = 1) -> np.ndarray:
    """Spectral ``d^order/dy^order`` in rfft space (Nyquist dropped)."""
    k = wavenumbers(n)
    d = (1j * k) ** order * coeffs
    if n % 2 == 0:
        d[-1] = 0.0
    return d


class KdVSolver:
    """Integrating-factor RK4 stepper for ``f_tau + a f_yyy + b f f_y = 0``."""

    def __init__(self, n: int, dispersion: float = 1.0, nonlinearity: float = 1.0):
        if n < MIN_GRID or n & (n - 1):
            raise InvalidInputError(f"grid size must be a power of two >= {MIN_GRID}")
        self.n = n
        self.a = float(dispersion)
        self.b = float(nonlinearity)
        self.k = wavenumbers(n)
        self.mask = dealias_mask(n)
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _factors(self, h: float):
        if h not in self._cache:
            lin = 1j * self.a * self.k**3
            self._cache[h] = (np.exp(lin * h / 2), np.exp(lin * h))
        return self._cache[h]

    def _nonlinear(self, fh: np.ndarray) -> np.ndarray:
        f = np.fft.irfft(fh, n=self.n)
        out = -0.5j * self.b * self.k * np.fft.rfft(f * f)
        out[~self.mask] = 0.0
        return out

    def check_step(self, fh: np.ndarray, h: float):
        fmax = float(np.max(np.abs(np.fft.irfft(fh, n=self.n))))
        k_max = np.pi * self.n / 2
        if h * abs(self.b) * fmax * k_max > 2.0:
            raise StabilityError(
                f"dtau={h:.3g} too large: dtau*|b|*max|f|*k_max = {h * abs(self.b) * fmax * k_max:.3g} > 2"
            )

    def step_spectrum(self, fh: np.ndarray, h: float) -> np.ndarray:
        E, E2 = self._factors(h)
        Nl = self._nonlinear
        k1 = Nl(fh)
        k2 = Nl(E * (fh + 0.5 * h * k1))
        k3 = Nl(E * fh + 0.5 * h * k2)
        k4 = Nl(E2 * fh + h * E * k3)
        out = E2 * fh + h / 6.0 * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
        out[~self.mask] = 0.0
        return out

    def advance_spectrum(self, fh: np.ndarray, span: float, dtau: float) -> np.ndarray:
        """Integrate over ``span`` with equal steps no larger than ``dtau``."""
        if span < 0:
            raise InvalidInputError("KdV solver only integrates forward in tau")
        if span == 0:
            return fh.copy()
        n_steps = int(np.ceil(span / dtau - 1e-9))
        h = span / n_steps
        self.check_step(fh, h)
        fh = fh.copy()
        fh[~self.mask] = 0.0
        for _ in range(n_steps):
            fh = self.step_spectrum(fh, h)
        if not np.all(np.isfinite(fh)):
            raise StabilityError("KdV solution became non-finite")
        return fh

    def evolve(self, field: KdVField, tau_end: float, dtau: float) -> KdVField:
        if field.n != self.n:
            raise InvalidInputError("field grid does not match solver grid")
        fh = self.advance_spectrum(field.spectrum, tau_end - field.tau, dtau)
        return KdVField.from_spectrum(fh, self.n, tau_end)


def default_dtau(n: int) -> float:
    """``1e-4`` at ``n = 256``, scaled with ``1/n``."""
    return 1e-4 * 256 / n


def kdv_step(field: KdVField, dtau: float, dispersion: float = 1.0, nonlinearity: float = 1.0) -> KdVField:
    """One integrating-factor RK4 step of the (normalised by default) KdV equation."""
    solver = KdVSolver(field.n, dispersion, nonlinearity)
    fh = field.spectrum
    solver.check_step(fh, dtau)
    fh = fh.copy()
    fh[~solver.mask] = 0.0
    return KdVField.from_spectrum(solver.step_spectrum(fh, dtau), field.n, field.tau + dtau)


@dataclass(frozen=True)
class ModulationParams:
    """Long-wave scaling: lattice spacing ``mu`` and amplitude ``eps = mu^2``."""

    mu: float
    eps: float | None = None

    def __post_init__(self):
        if not 0 < self.mu <= 0.125:
            raise InvalidInputError("mu must lie in (0, 1/8]")
        eps = self.mu**2 if self.eps is None else self.eps
        if not np.isclose(eps, self.mu**2, rtol=1e-12, atol=0.0):
            raise InvalidInputError("only the standard KdV regime eps = mu^2 is supported")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def for_chain(cls, chain: ChainParams) -> "ModulationParams":
        return cls(mu=PERIOD / chain.sites)


def _check_chain(mod: ModulationParams, chain: ChainParams):
    if chain.boundary != PERIODIC:
        raise InvalidInputError("the modulation bridge needs a periodic chain")
    if chain.sites % 2:
        raise InvalidInputError("periodic chain must have M = 2N+2 sites")
    if not np.isclose(mod.mu * chain.sites, PERIOD, rtol=1e-12):
        raise InvalidInputError(f"mu={mod.mu} incompatible with M={chain.sites}: need mu*M = 2")


def _cumulative_from_differences(d: np.ndarray) -> np.ndarray:
    """Zero-mean ``x`` with ``x_j - x_{j+1} = d_j`` (``d`` summing to ~0)."""
    x = np.concatenate([[0.0], -np.cumsum(d[:-1])])
    return x - x.mean()


def _reference_rdot(fh, gh, n, y_f, y_g, mu, solver: KdVSolver):
    # d/dt of mu^2[f(mu(j-t), mu^3 t) + g(-mu(j+t), mu^3 t)]
    ftau = -solver.a * evaluate(derivative(fh, n, 3), n, y_f) - solver.b * evaluate(fh, n, y_f) * evaluate(derivative(fh, n, 1), n, y_f)
    gtau = -solver.a * evaluate(derivative(gh, n, 3), n, y_g) - solver.b * evaluate(gh, n, y_g) * evaluate(derivative(gh, n, 1), n, y_g)
    fy = evaluate(derivative(fh, n, 1), n, y_f)
    gy = evaluate(derivative(gh, n, 1), n, y_g)
    return mu**2 * (-mu * fy + mu**3 * ftau - mu * gy + mu**3 * gtau)


def lattice_from_profiles(
    f0: KdVField,
    g0: KdVField,
    mod: ModulationParams,
    chain: ChainParams,
    momentum: str = "leading",
) -> LatticeState:
    """Lattice state whose bonds interpolate the two KdV profiles.

    ``r_j = mu^2 [f0(mu j) + g0(-mu j)]`` and ``sum q = 0``.  Momenta:

    * ``"leading"``: ``p_j = mu^2 [f0(mu j) - g0(-mu j)]`` (leading order of the
      two-wave ansatz), mean removed;
    * ``"exact"``: ``p`` solves ``p_j - p_{j+1} = d r_j^KdV/dt`` at ``t = 0``, i.e.
      the lattice starts with the reference solution's own velocity.
    """
    _check_chain(mod, chain)
    if f0.n != g0.n:
        raise InvalidInputError("profiles must share a grid")
    mu = mod.mu
    j = np.arange(chain.sites)
    fv = f0(mu * j)
    gv = g0(-mu * j)
    r = mu**2 * (fv + gv)
    scale = max(np.sum(np.abs(r)), np.finfo(float).tiny)
    if abs(np.sum(r)) > 1e-9 * scale:
        raise InvalidInputError("profiles must have zero combined mean so that sum_j r_j = 0")
    q = _cumulative_from_differences(r - r.mean())
    if momentum == "leading":
        p = mu**2 * (fv - gv)
        p = p - p.mean()
    elif momentum == "exact":
        solver = KdVSolver(f0.n, LATTICE_DISPERSION, LATTICE_NONLINEARITY)
        rdot = _reference_rdot(f0.spectrum, g0.spectrum, f0.n, mu * j, -mu * j, mu, solver)
        p = _cumulative_from_differences(rdot - rdot.mean())
    else:
        raise InvalidInputError(f"unknown momentum reconstruction {momentum!r}")
    return LatticeState(q, p, 0.0)


class KdVReference:
    """Lazily integrated pair of KdV solutions providing ``r^KdV_j(t)``.

    The profiles are advanced once up to ``t_max`` (KdV time ``mu^3 t_max``),
    storing checkpoints; queries integrate from the nearest earlier checkpoint.
    """

    def __init__(
        self,
        f0: KdVField,
        g0: KdVField,
        mod: ModulationParams,
        chain: ChainParams,
        t_max: float,
        dtau: float | None = None,
        checkpoint_every: int = 100,
    ):
        _check_chain(mod, chain)
        if f0.n != g0.n:
            raise InvalidInputError("profiles must share a grid")
        self.mod = mod
        self.chain = chain
        self.n = f0.n
        self.dtau = default_dtau(self.n) if dtau is None else dtau
        self.solver = KdVSolver(self.n, LATTICE_DISPERSION, LATTICE_NONLINEARITY)
        self.t_max = float(t_max)
        self.tau_max = mod.mu**3 * self.t_max
        self._taus = [0.0]
        self._states = [(f0.spectrum, g0.spectrum)]
        span = self.dtau * checkpoint_every
        tau = 0.0
        fh, gh = self._states[0]
        while tau < self.tau_max:
            nxt = min(tau + span, self.tau_max)
            fh = self.solver.advance_spectrum(fh, nxt - tau, self.dtau)
            gh = self.solver.advance_spectrum(gh, nxt - tau, self.dtau)
            tau = nxt
            self._taus.append(tau)
            self._states.append((fh, gh))

    def profiles_at(self, t: float):
        """rfft coefficients of ``(f, g)`` at KdV time ``mu^3 t``."""
        if t < 0 or t > self.t_max * (1 + 1e-12):
            raise InvalidInputError(f"t={t} outside the integrated horizon [0, {self.t_max}]")
        tau = min(self.mod.mu**3 * t, self.tau_max)
        i = bisect_right(self._taus, tau) - 1
        fh, gh = self._states[i]
        span = tau - self._taus[i]
        if span > 0:
            fh = self.solver.advance_spectrum(fh, span, self.dtau)
            gh = self.solver.advance_spectrum(gh, span, self.dtau)
        return fh, gh

    def r_at(self, t: float) -> np.ndarray:
        mu = self.mod.mu
        fh, gh = self.profiles_at(t)
        j = np.arange(self.chain.sites)
        return mu**2 * (evaluate(fh, self.n, mu * (j - t)) + evaluate(gh, self.n, -mu * (j + t)))


def kdv_reference_r(f0: KdVField, g0: KdVField, mod: ModulationParams, chain: ChainParams, t: float, dtau: float | None = None) -> np.ndarray:
    """``r^KdV_j(t)`` for all sites (one-off query; builds a :class:`KdVReference`)."""
    return KdVReference(f0, g0, mod, chain, t_max=t, dtau=dtau).r_at(t)


@dataclass(frozen=True)
class ErrorCurve:
    times: np.ndarray
    error: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(self.error))


def compare_fpu_kdv(times, q_snapshots, reference: KdVReference) -> ErrorCurve:
    """``sup_j |r_j(t) - r^KdV_j(t)|`` at each snapshot."""
    q = np.asarray(q_snapshots, dtype=float)
    times = np.asarray(times, dtype=float)
    if q.ndim != 2 or q.shape[1] != reference.chain.sites or q.shape[0] != times.size:
        raise InvalidInputError("snapshots must be (n_times, M) matching the reference chain")
    r = bonds(q, PERIODIC)
    err = np.array([np.max(np.abs(r[i] - reference.r_at(t))) for i, t in enumerate(times)])
    return ErrorCurve(times, err)
