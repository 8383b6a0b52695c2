"""Canonical-ensemble sampling and the Monte Carlo probe of adiabatic invariance.

Positions are sampled by single-site Metropolis sweeps on the FPU potential of a
Dirichlet chain, momenta exactly from ``N(0, 1/beta)``.  Ensemble dynamics use
the symplectic integrators on batches of independent initial conditions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from fpulab.errors import BlowUpError, CalibrationError, InsufficientDataError, InvalidInputError
from fpulab.integrators import IntegratorConfig, evolve_batch
from fpulab.lattice import DIRICHLET, ChainParams, LatticeState
from fpulab.spectral import mode_energy_arrays, nonzero_wavenumbers

ACCEPT_TARGET = (0.3, 0.5)
ACCEPT_LIMITS = (0.05, 0.95)


# --------------------------------------------------------------------- profiles


def _smootherstep(s):
    s = np.clip(s, 0.0, 1.0)
    return np.clip(s**3 * (10 - 15 * s + 6 * s * s), 0.0, 1.0)


def _dsmootherstep(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 30 * s * s * (1 - s) ** 2, 0.0)


@dataclass(frozen=True)
class ModeProfile:
    """Weight function ``g`` on ``[0, 1]`` from a closed-form family.

    Families:

    * ``constant``: ``g = value``.
    * ``raised_cosine``: ``g = [ (1 + cos(pi (x - center)/width)) / 2 ]**power``
      on ``|x - center| < width``, zero outside.  ``power = 2`` makes it C^2.
    * ``plateau``: 1 on ``[left, right]``, falling to 0 over ``edge`` with a
      quintic smoothstep (C^2).
    """

    family: str
    value: float = 1.0
    center: float = 0.0
    width: float = 0.25
    power: int = 2
    left: float = 0.0
    right: float = 0.25
    edge: float = 0.1

    def __post_init__(self):
        if self.family not in ("constant", "raised_cosine", "plateau"):
            raise InvalidInputError(f"unknown profile family {self.family!r}")
        if self.family == "constant" and self.value < 0:
            raise InvalidInputError("profiles must be non-negative")
        if self.family == "raised_cosine" and (self.width <= 0 or self.power < 1):
            raise InvalidInputError("raised_cosine needs width > 0 and power >= 1")
        if self.family == "plateau" and (self.edge <= 0 or self.right < self.left):
            raise InvalidInputError("plateau needs edge > 0 and left <= right")

    @classmethod
    def constant(cls, value: float = 1.0):
        return cls("constant", value=value)

    @classmethod
    def raised_cosine(cls, center: float = 0.0, width: float = 0.25, power: int = 2):
        return cls("raised_cosine", center=center, width=width, power=power)

    @classmethod
    def plateau(cls, left: float = 0.0, right: float = 0.25, edge: float = 0.1):
        return cls("plateau", left=left, right=right, edge=edge)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.full_like(x, self.value)
        if self.family == "raised_cosine":
            z = (x - self.center) / self.width
            base = np.where(np.abs(z) < 1, 0.5 * (1 + np.cos(np.pi * z)), 0.0)
            return base**self.power
        up = 1 - _smootherstep((self.left - x) / self.edge) if self.left > 0 else np.ones_like(x)
        down = 1 - _smootherstep((x - self.right) / self.edge)
        return np.where(x < self.left, up, np.where(x > self.right, down, 1.0))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.zeros_like(x)
        if self.family == "raised_cosine":
            z = (x - self.center) / self.width
            inside = np.abs(z) < 1
            base = 0.5 * (1 + np.cos(np.pi * z))
            dbase = -0.5 * np.pi / self.width * np.sin(np.pi * z)
            return np.where(inside, self.power * base ** (self.power - 1) * dbase, 0.0)
        d_up = _dsmootherstep((self.left - x) / self.edge) / self.edge if self.left > 0 else np.zeros_like(x)
        d_down = -_dsmootherstep((x - self.right) / self.edge) / self.edge
        return np.where(x < self.left, d_up, np.where(x > self.right, d_down, 0.0))

    @property
    def flat_at_origin(self) -> bool:
        """Whether ``g'(0) = 0`` (evaluated from the closed-form derivative)."""
        return abs(float(self.derivative(0.0))) <= 1e-14


def profile_weights(profile: ModeProfile, params: ChainParams) -> np.ndarray:
    """``g(|k|/(N+1))`` for the nonzero modes in storage order."""
    k = np.abs(nonzero_wavenumbers(params.N, params.boundary))
    return profile(k / (params.N + 1))


def phi_g_arrays(q, p, weights, params: ChainParams) -> np.ndarray:
    return mode_energy_arrays(q, p, params) @ weights


def phi_g(state: LatticeState, profile: ModeProfile, params: ChainParams) -> float:
    """``Phi_g = sum_k g(k/(N+1)) E_k``."""
    return float(phi_g_arrays(state.q, state.p, profile_weights(profile, params), params))


# --------------------------------------------------------------------- sampler


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler settings.  ``thin`` and ``burn_in`` count Metropolis sweeps."""

    beta: float
    chain: ChainParams
    burn_in: int = 2000
    samples: int = 1000
    thin: int = 10
    width: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError("beta must be positive")
        if self.chain.boundary != DIRICHLET:
            raise InvalidInputError("Gibbs sampling is defined on the Dirichlet chain")
        if self.samples < 2:
            raise InvalidInputError("need at least 2 retained samples")
        if self.thin < 1 or self.burn_in < 0:
            raise InvalidInputError("thin must be >= 1 and burn_in >= 0")
        if self.width is not None and not self.width > 0:
            raise InvalidInputError("proposal width must be positive")


@njit(cache=True, nogil=True)
def _local_energy(a, b, c, A):
    # bonds (a - b) and (b - c)
    r1 = a - b
    r2 = b - c
    return (r1 * r1 / 2 + r1 * r1 * r1 / 6 + A * r1 * r1 * r1 * r1 / 24) + (
        r2 * r2 / 2 + r2 * r2 * r2 / 6 + A * r2 * r2 * r2 * r2 / 24
    )


@njit(cache=True, nogil=True)
def _metropolis(q, beta, A, width, steps, uniforms):
    """Sequential single-site sweeps; returns the number of accepted moves."""
    S, N = steps.shape
    accepted = 0
    for s in range(S):
        for j in range(N):
            left = q[j - 1] if j > 0 else 0.0
            right = q[j + 1] if j < N - 1 else 0.0
            old = q[j]
            new = old + width * steps[s, j]
            dE = _local_energy(left, new, right, A) - _local_energy(left, old, right, A)
            if dE <= 0.0 or uniforms[s, j] < np.exp(-beta * dE):
                q[j] = new
                accepted += 1
    return accepted


@dataclass
class GibbsDraws:
    """Retained draws (rows) plus sampler diagnostics."""

    q: np.ndarray
    p: np.ndarray
    params: ChainParams
    acceptance: float
    width: float
    beta: float

    def __len__(self):
        return self.q.shape[0]

    def __iter__(self):
        for qi, pi in zip(self.q, self.p):
            yield LatticeState(qi, pi)


def _sweeps(rng, q, cfg: GibbsConfig, width: float, n: int, chunk: int = 256):
    acc = 0
    N = q.size
    done = 0
    while done < n:
        m = min(chunk, n - done)
        acc += _metropolis(q, cfg.beta, cfg.chain.A, width, rng.standard_normal((m, N)), rng.random((m, N)))
        done += m
    return acc


def sample_gibbs(cfg: GibbsConfig) -> GibbsDraws:
    """Draw ``cfg.samples`` states from ``exp(-beta H_FPU)``.

    The proposal width is tuned during burn-in towards an acceptance rate in
    [0.3, 0.5]; the production acceptance must lie in [0.05, 0.95].
    """
    chain_seed, *momentum_seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.samples + 1)
    rng = np.random.default_rng(chain_seed)
    N = cfg.chain.sites
    q = np.zeros(N)
    width = cfg.width if cfg.width is not None else 1.0 / np.sqrt(cfg.beta)
    block = 100
    done = 0
    while done < cfg.burn_in:
        m = min(block, cfg.burn_in - done)
        rate = _sweeps(rng, q, cfg, width, m) / (m * N)
        if rate < ACCEPT_TARGET[0]:
            width *= 0.8
        elif rate > ACCEPT_TARGET[1]:
            width *= 1.25
        done += m
    qs = np.empty((cfg.samples, N))
    acc = 0
    for i in range(cfg.samples):
        acc += _sweeps(rng, q, cfg, width, cfg.thin)
        qs[i] = q
    # one momentum stream per retained draw, so draw i does not depend on the chain length
    ps = np.array([np.random.default_rng(ss).standard_normal(N) for ss in momentum_seeds]) / np.sqrt(cfg.beta)
    rate = acc / (cfg.samples * cfg.thin * N)
    if not ACCEPT_LIMITS[0] <= rate <= ACCEPT_LIMITS[1]:
        raise CalibrationError(f"acceptance rate {rate:.3f} outside {ACCEPT_LIMITS} (width {width:.3g})")
    return GibbsDraws(qs, ps, cfg.chain, rate, width, cfg.beta)


def harmonic_covariance(N: int, beta: float) -> np.ndarray:
    """Exact position covariance ``(beta K)^-1`` of the harmonic Dirichlet chain."""
    K = 2 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    return np.linalg.inv(beta * K)


# --------------------------------------------------------------------- statistics


def autocorrelation_function(x: np.ndarray) -> np.ndarray:
    """Normalised autocorrelation of a 1-D series (FFT based)."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.size
    f = np.fft.rfft(x, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] == 0:
        return np.zeros(n)
    return acf / acf[0]


def integrated_time(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window."""
    rho = autocorrelation_function(x)
    taus = 2.0 * np.cumsum(rho) - 1.0
    window = np.arange(taus.size) < c * taus
    m = int(np.argmin(window)) if not window.all() else taus.size - 1
    return float(max(taus[m], 1.0))


@dataclass
class EnsembleStats:
    """Mean, variance, standard errors, and effective sample size of an observable."""

    mean: float
    variance: float
    se_mean: float
    se_variance: float
    ess: float
    n: int
    degenerate: bool = False
    times: np.ndarray | None = None
    autocorr: np.ndarray | None = None
    autocorr_se: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _batch_se(x: np.ndarray) -> float:
    n = x.size
    nb = max(int(np.sqrt(n)), 2)
    size = n // nb
    if size < 1:
        return float(np.std(x, ddof=1) / np.sqrt(n))
    means = x[: nb * size].reshape(nb, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(nb))


def _centered_product_mean(a: np.ndarray, b: np.ndarray, m) -> float:
    return float(np.mean((a - m) * (b - m)))


def variance(x: np.ndarray) -> float:
    """Two-pass population variance; shares its accumulation with :func:`autocorrelation`."""
    x = np.asarray(x, dtype=float)
    return _centered_product_mean(x, x, np.mean(x))


def ensemble_stats(values) -> EnsembleStats:
    """Statistics of an observable evaluated along an MCMC chain (in chain order)."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientDataError("need at least 2 draws")
    var = variance(x)
    mean = float(np.mean(x))
    if var == 0.0:
        warnings.warn("observable is constant over the draws; variance is zero", RuntimeWarning, stacklevel=2)
        return EnsembleStats(mean, 0.0, 0.0, 0.0, float(x.size), x.size, degenerate=True)
    tau = integrated_time(x)
    ess = min(x.size / tau, float(x.size))
    return EnsembleStats(
        mean=mean,
        variance=var,
        se_mean=_batch_se(x),
        se_variance=_batch_se((x - mean) ** 2),
        ess=ess,
        n=x.size,
    )


# --------------------------------------------------------------------- dynamics


@dataclass
class EnsembleRun:
    """Observable values ``F[t_index, trajectory]`` along an evolved Gibbs ensemble."""

    times: np.ndarray
    values: np.ndarray
    n_excluded: int


def evolve_ensemble(draws: GibbsDraws, integ: IntegratorConfig, observable, max_failed_fraction: float = 0.01) -> EnsembleRun:
    """Evolve every draw and record ``observable(q, p) -> (B,)`` at each sample.

    Trajectories that blow up are dropped; more than ``max_failed_fraction`` aborts.
    """
    params = draws.params
    res = evolve_batch(draws.q, draws.p, params, integ, reducer=observable)
    vals = np.array(res.samples)
    if res.n_failed > max_failed_fraction * len(draws):
        raise BlowUpError(f"{res.n_failed} of {len(draws)} trajectories blew up", partial=res)
    return EnsembleRun(res.times, vals[:, res.alive], res.n_failed)


def autocorrelation_from_run(run: EnsembleRun) -> EnsembleStats:
    """``C_F(t) = avg[(F(0) - m)(F(t) - m)]`` with ``m = avg F(0)``, with ensemble SEs.

    At ``t = 0`` this is exactly :func:`variance` of the initial values.
    """
    F0 = run.values[0]
    m = np.mean(F0)
    C = np.array([_centered_product_mean(F0, Ft, m) for Ft in run.values])
    prods = (F0 - m)[None, :] * (run.values - m)
    se = np.std(prods, axis=1, ddof=1) / np.sqrt(F0.size)
    st = ensemble_stats(F0)
    st.times = run.times
    st.autocorr = C
    st.autocorr_se = se
    st.extra["n_excluded"] = run.n_excluded
    return st


def _subsample(draws: GibbsDraws, n_traj: int) -> GibbsDraws:
    if len(draws) < n_traj:
        raise InsufficientDataError(f"need {n_traj} draws, sampler produced {len(draws)}")
    idx = np.linspace(0, len(draws) - 1, n_traj).round().astype(int)
    return GibbsDraws(draws.q[idx], draws.p[idx], draws.params, draws.acceptance, draws.width, draws.beta)


def autocorrelation(
    observable,
    gibbs: GibbsConfig,
    integ: IntegratorConfig,
    n_traj: int = 200,
    draws: GibbsDraws | None = None,
) -> EnsembleStats:
    """Time autocorrelation of ``observable(q, p) -> (B,)`` over Gibbs-sampled trajectories.

    Sample times are the integrator sampling grid (``integ.stride`` steps up to ``integ.T``).
    """
    draws = sample_gibbs(gibbs) if draws is None else draws
    return autocorrelation_from_run(evolve_ensemble(_subsample(draws, n_traj), integ, observable))


@dataclass
class ProbeResult:
    """Exceedance curve and drift summary of an adiabatic-invariance probe."""

    times: np.ndarray
    exceedance: np.ndarray
    exceedance_se: np.ndarray
    median_drift: np.ndarray
    sigma_phi: float
    delta1: float
    delta2: float
    t_star: float
    t_exceed: float
    n_traj: int
    n_excluded: int
    run: EnsembleRun | None = field(default=None, repr=False)

    def exceedance_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.exceedance))


def first_crossing(times, values, level) -> float:
    """First time ``values`` reaches ``level`` (linear interpolation); ``inf`` if never."""
    values = np.asarray(values)
    hit = np.flatnonzero(values >= level)
    if hit.size == 0:
        return float("inf")
    i = hit[0]
    if i == 0:
        return float(times[0])
    t0, t1 = times[i - 1], times[i]
    v0, v1 = values[i - 1], values[i]
    return float(t0 + (level - v0) / (v1 - v0) * (t1 - t0))


def adiabatic_probe(
    profile,
    gibbs: GibbsConfig,
    integ: IntegratorConfig,
    delta1: float,
    delta2: float = 0.1,
    n_traj: int = 200,
    drift_level: float = 0.2,
    beta_star: float = 0.0,
    draws: GibbsDraws | None = None,
) -> ProbeResult:
    """Monte Carlo estimate of ``P(|Phi_g(t) - Phi_g(0)| >= delta1 * sigma_Phi)``.

    ``sigma_Phi`` is estimated from the full MCMC chain; ``n_traj`` initial
    conditions are taken from that chain at equal spacing.  ``t_star`` is the
    first time the median of ``|Phi_g(t) - Phi_g(0)| / sigma_Phi`` reaches
    ``drift_level``; ``t_exceed`` the first time the exceedance reaches ``delta2``.
    ``profile`` may also be a sequence of profiles, probed through the sum of
    their ``Phi_g`` (several packets observed together).
    """
    profiles = (profile,) if isinstance(profile, ModeProfile) else tuple(profile)
    if not profiles or not all(pf.flat_at_origin for pf in profiles):
        raise InvalidInputError("profile must satisfy g'(0) = 0")
    if gibbs.beta <= beta_star:
        raise InvalidInputError(f"beta={gibbs.beta} must exceed beta*={beta_star}")
    if delta1 <= 0:
        raise InvalidInputError("delta1 must be positive")
    params = gibbs.chain
    draws = sample_gibbs(gibbs) if draws is None else draws
    w = sum(profile_weights(pf, params) for pf in profiles)
    phi_chain = phi_g_arrays(draws.q, draws.p, w, params)
    sigma = np.sqrt(variance(phi_chain))
    run = evolve_ensemble(_subsample(draws, n_traj), integ, lambda q, p: phi_g_arrays(q, p, w, params))
    dev = np.abs(run.values - run.values[0]) / sigma
    n = dev.shape[1]
    exc = np.mean(dev >= delta1, axis=1)
    se = np.sqrt(exc * (1 - exc) / n)
    med = np.median(dev, axis=1)
    return ProbeResult(
        times=run.times,
        exceedance=exc,
        exceedance_se=se,
        median_drift=med,
        sigma_phi=float(sigma),
        delta1=delta1,
        delta2=delta2,
        t_star=first_crossing(run.times, med, drift_level),
        t_exceed=first_crossing(run.times, exc, delta2),
        n_traj=n,
        n_excluded=run.n_excluded,
        run=run,
    )

