"""Experiment drivers: read an INI config, run a scan, write CSV artifacts.

Every CSV starts with a provenance comment ``# config_sha256=<hash> seed=<S>``
followed by a header row; floats are written with 17 significant digits.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fpulab.errors import BlowUpError, InsufficientDataError, InvalidInputError
from fpulab.gibbs import GibbsConfig, ModeProfile, adiabatic_probe, autocorrelation_from_run
from fpulab.initial import packet_datum, single_mode
from fpulab.integrators import IntegratorConfig, evolve
from fpulab.kdv import KdVField, KdVReference, ModulationParams, compare_fpu_kdv, lattice_from_profiles
from fpulab.lattice import DIRICHLET, FPU, PERIODIC, TODA, ChainParams
from fpulab.spectral import fold_abs_k, packet_fit, spectral_entropy, time_average
from fpulab.toda import spectrum_drift, weighted_action_drift

OUT_ENV = "FPU_LAB_OUT"
DEFAULT_OUT = "fpu-lab-out"


# --------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    """Parsed experiment configuration plus run-time overrides."""

    name: str
    parser: configparser.ConfigParser
    sha256: str
    seed: int
    out_dir: Path
    threads: int = 1

    def section(self, name: str) -> "Section":
        return Section(self, name)

    def enabled(self, name: str) -> bool:
        return self.parser.has_section(name) and self.section(name).boolean("enabled", True)


class Section:
    """Typed accessors for one INI section; missing or malformed keys raise InvalidInputError."""

    def __init__(self, cfg: ExperimentConfig, name: str):
        self.name = name
        self._p = cfg.parser

    def _raw(self, key, default):
        if self._p.has_option(self.name, key):
            return self._p.get(self.name, key)
        if default is _REQUIRED:
            raise InvalidInputError(f"missing [{self.name}] {key}")
        return default

    def _convert(self, key, default, conv):
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return conv(raw)
        except ValueError as exc:
            raise InvalidInputError(f"[{self.name}] {key} = {raw!r}: {exc}") from None

    def text(self, key, default=None):
        raw = self._raw(key, _REQUIRED if default is None else default)
        return raw.strip()

    def real(self, key, default=None):
        return self._convert(key, _REQUIRED if default is None else default, float)

    def integer(self, key, default=None):
        return self._convert(key, _REQUIRED if default is None else default, int)

    def boolean(self, key, default=None):
        conv = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}

        def parse(s):
            if s.strip().lower() not in conv:
                raise ValueError("expected a boolean")
            return conv[s.strip().lower()]

        return self._convert(key, _REQUIRED if default is None else default, parse)

    def reals(self, key, default=None):
        return self._convert(key, _REQUIRED if default is None else default, lambda s: [float(x) for x in s.split(",")])

    def integers(self, key, default=None):
        return self._convert(key, _REQUIRED if default is None else default, lambda s: [int(x) for x in s.split(",")])


_REQUIRED = object()


def load_config(path, experiment: str | None = None, seed: int | None = None, out=None, threads: int = 1) -> ExperimentConfig:
    """Read an INI file.  ``out`` beats the ``FPU_LAB_OUT`` variable, which beats the default."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(raw.decode("utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"malformed config {path}: {exc}") from None
    if not parser.has_section("experiment"):
        raise InvalidInputError("config needs an [experiment] section")
    name = parser.get("experiment", "name", fallback="").strip()
    if name not in RUNNERS:
        raise InvalidInputError(f"unknown experiment {name!r}; choose from {sorted(RUNNERS)}")
    if experiment is not None and experiment != name:
        raise InvalidInputError(f"config is for {name!r}, not {experiment!r}")
    if threads < 1:
        raise InvalidInputError("threads must be >= 1")
    if seed is None:
        try:
            seed = parser.getint("experiment", "seed", fallback=0)
        except ValueError as exc:
            raise InvalidInputError(f"[experiment] seed: {exc}") from None
    if seed < 0:
        raise InvalidInputError("seed must be non-negative")
    out_dir = Path(out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    return ExperimentConfig(name, parser, hashlib.sha256(raw).hexdigest(), int(seed), out_dir, threads)


def _prepare_out(cfg: ExperimentConfig) -> Path:
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"output directory {cfg.out_dir} is not writable: {exc}") from None
    if not os.access(cfg.out_dir, os.W_OK):
        raise InvalidInputError(f"output directory {cfg.out_dir} is not writable")
    return cfg.out_dir


# --------------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, columns, rows, cfg: ExperimentConfig) -> Path:
    """Write a provenance line, the header, then one line per row."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config_sha256={cfg.sha256} seed={cfg.seed} experiment={cfg.name}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise InvalidInputError(f"row width {len(row)} != {len(columns)} columns in {path.name}")
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV written by :func:`write_csv`: ``(columns, data)``."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    cols = lines[0].strip().split(",")
    data = np.array([[float(x) for x in ln.strip().split(",")] for ln in lines[1:] if ln.strip()])
    return cols, data.reshape(-1, len(cols))


@dataclass
class RunResult:
    """Summary numbers of an experiment plus the files it wrote."""

    name: str
    summary: dict
    files: list = field(default_factory=list)


def _write_report(out: Path, summary: dict, cfg: ExperimentConfig, name="report.csv") -> Path:
    return write_csv(out / name, ["quantity", "value"], [(k, v) for k, v in summary.items()], cfg)


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _integrator(cfg: ExperimentConfig, section="integrator", T=None) -> IntegratorConfig:
    s = cfg.section(section)
    return IntegratorConfig(
        dt=s.real("dt", 0.05),
        scheme=s.text("scheme", "yoshida4"),
        T=s.real("T") if T is None else T,
        stride=s.integer("stride", 1),
    )


def _sub_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def linear_fit(x, y):
    """Least-squares line: ``(slope, intercept, r2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 points for a line")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


# --------------------------------------------------------------------- analyses


def detect_recurrence(times, e1, dip: float = 0.5, rise: float = 0.75):
    """First near-recurrence of a normalised mode-energy trace.

    After the trace first falls below ``dip``, the first excursion back above
    ``rise`` is located and its peak reported as ``(time, amplitude, dip_min)``.
    Returns NaNs when no dip or no return happens.
    """
    e1 = np.asarray(e1, dtype=float)
    below = np.flatnonzero(e1 < dip)
    if below.size == 0:
        return float("nan"), float("nan"), float(np.min(e1)) if e1.size else float("nan")
    i0 = below[0]
    after = np.flatnonzero(e1[i0:] > rise)
    if after.size == 0:
        return float("nan"), float("nan"), float(np.min(e1[i0:]))
    a = i0 + after[0]
    end = np.flatnonzero(e1[a:] <= rise)
    b = a + end[0] if end.size else e1.size
    peak = a + int(np.argmax(e1[a:b]))
    return float(times[peak]), float(e1[peak]), float(np.min(e1[i0:a]))


def geometric_ratio(envelope) -> float:
    """``max_{k>=2} (env_k / env_1)^{1/(k-1)}`` for a profile indexed from ``k = 1``."""
    env = np.asarray(envelope, dtype=float)
    if env.size < 2 or not env[0] > 0:
        raise InsufficientDataError("need a positive first entry and at least 2 modes")
    k = np.arange(2, env.size + 1)
    return float(np.max((np.maximum(env[1:], 0.0) / env[0]) ** (1.0 / (k - 1))))


def packet_radius(k, envelope, mu: float) -> float:
    """Smallest ``R^2`` with ``envelope_k <= mu^4 R^{2|k|}`` for every signed mode ``k != 0``."""
    k = np.abs(np.asarray(k))
    env = np.asarray(envelope, dtype=float)
    keep = k > 0
    return float(np.max((np.maximum(env[keep], 0.0) / mu**4) ** (1.0 / k[keep])))


def packet_bound(envelope, k, mu: float, floor: float = 1e-20):
    """Fit ``env_k <= C mu^4 e^{-sigma k} + C mu^5``.

    ``sigma`` is the decay rate of the modes above ``floor`` (relative to the
    largest entry); ``C`` the smallest constant covering those modes.  Returns
    ``(sigma, C, holds)`` where ``holds`` checks every mode, including the ones
    under the floor that the ``mu^5`` term must cover.
    """
    env = np.asarray(envelope, dtype=float)
    k = np.asarray(k, dtype=float)
    fit = packet_fit(env / env.max(), k, floor=floor)
    n = fit.n_used
    C = float(np.max(env[:n] * np.exp(fit.sigma * k[:n])) / mu**4)
    bound = C * mu**4 * np.exp(-fit.sigma * k) + C * mu**5
    return fit.sigma, C, bool(np.all(env <= bound * (1 + 1e-12)))


# --------------------------------------------------------------------- fpu-recurrence


def run_fpu_recurrence(cfg: ExperimentConfig) -> RunResult:
    """Single-mode (or two-mode packet) FPU run: traces, time averages, recurrence report."""
    out = _prepare_out(cfg)
    c = cfg.section("chain")
    params = ChainParams.from_modes(c.integer("modes"), c.text("boundary", DIRICHLET), A=c.real("A", 1.0))
    ini = cfg.section("initial")
    kind = ini.text("kind", "single_mode")
    if kind == "single_mode":
        state = single_mode(params, ini.real("specific_energy"), k=ini.integer("k", 1), phase=ini.real("phase", 0.0))
    elif kind == "packet":
        state = packet_datum(params, ini.real("R"), phase=ini.real("phase", 0.0))
    else:
        raise InvalidInputError(f"[initial] kind must be single_mode or packet, not {kind!r}")
    integ = _integrator(cfg)
    a = cfg.section("analysis")
    floor = a.real("floor", 1e-20)
    files = []
    try:
        traj = evolve(state, params, integ)
        err = None
    except BlowUpError as exc:
        traj, err = exc.partial, exc
    trace = traj.trace
    k_abs, E = fold_abs_k(trace.k, trace.energies)
    files.append(
        write_csv(
            out / "mode_energies.csv",
            ["t", "H"] + [f"E_{k}" for k in k_abs],
            (np.concatenate([[t, h], e]) for t, h, e in zip(traj.times, traj.hamiltonian, E)),
            cfg,
        )
    )
    if err is not None:
        files.append(_write_report(out, {"status": "blow-up", "t_blowup": err.t, "message": str(err)}, cfg, "error.csv"))
        raise err
    T = traj.times[-1]
    avg = fold_abs_k(trace.k, time_average(trace, T))[1] if len(traj) > 1 else E[0]
    env = E.max(axis=0)
    files.append(
        write_csv(
            out / "time_averages.csv",
            ["k", "mean_E", "mean_specific", "envelope_specific"],
            zip(k_abs, avg, avg / params.N, env / params.N),
            cfg,
        )
    )
    summary = {"N": params.N, "boundary": params.boundary, "A": params.A, "T": float(T)}
    e1 = E[:, 0] / E[0, 0] if E[0, 0] > 0 else np.zeros(len(E))
    rt, ramp, dmin = detect_recurrence(traj.times, e1, a.real("dip", 0.5), a.real("rise", 0.75))
    summary.update(recurrence_time=rt, recurrence_amplitude=ramp, dip_min=dmin)
    try:
        fit = packet_fit(avg, k_abs, floor=floor * max(avg.max(), np.finfo(float).tiny))
        summary.update(packet_sigma=fit.sigma, packet_r2=fit.r2, packet_modes=fit.n_used)
    except InsufficientDataError:
        summary.update(packet_sigma=float("nan"), packet_r2=float("nan"), packet_modes=0)
    try:
        summary["n_eff"] = spectral_entropy(avg)[1]
        summary["geometric_ratio"] = geometric_ratio(env[k_abs <= params.N])
    except (InvalidInputError, InsufficientDataError):
        summary["n_eff"] = float("nan")
        summary["geometric_ratio"] = float("nan")
    if kind == "packet":
        inside = np.abs(trace.k) <= params.N
        summary["packet_radius_sq"] = packet_radius(trace.k[inside], trace.specific[:, inside].max(axis=0), params.mu)
    h = traj.hamiltonian
    summary["max_relative_energy_drift"] = float(np.max(np.abs(h - h[0])) / abs(h[0])) if h[0] != 0 else 0.0
    files.append(_write_report(out, summary, cfg))
    return RunResult(cfg.name, summary, files)


# --------------------------------------------------------------------- kdv-compare


def _kdv_point(N, cfg: ExperimentConfig):
    s = cfg.section("scan")
    chain = ChainParams.from_modes(N, PERIODIC, A=cfg.section("chain").real("A", 1.0) if cfg.parser.has_section("chain") else 1.0)
    mod = ModulationParams.for_chain(chain)
    kd = cfg.section("kdv")
    n = kd.integer("grid", 256)
    af, ag = s.real("f_amplitude", 1.0), s.real("g_amplitude", 0.0)
    f0 = KdVField.from_function(lambda y: af * np.cos(np.pi * y), n=n)
    g0 = KdVField.from_function(lambda y: ag * np.cos(np.pi * y), n=n)
    state = lattice_from_profiles(f0, g0, mod, chain, momentum=s.text("momentum", "leading"))
    T = s.real("Tf", 1.0) / mod.mu**3
    ic = cfg.section("integrator")
    dt = ic.real("dt", 0.05)
    stride = max(1, int(T / dt / ic.integer("samples", 200)))
    traj = evolve(state, chain, IntegratorConfig(dt, ic.text("scheme", "yoshida4"), T, stride))
    ref = KdVReference(f0, g0, mod, chain, t_max=traj.times[-1], dtau=kd.real("dtau", 0.0) or None)
    curve = compare_fpu_kdv(traj.times, traj.q, ref)
    k_abs, Ek = fold_abs_k(traj.trace.k, traj.trace.specific)
    return chain, mod.mu, curve, k_abs, Ek.max(axis=0)


def run_kdv_compare(cfg: ExperimentConfig) -> RunResult:
    """FPU vs KdV-reference error over a scan in ``N`` (hence ``mu``): order fit and packet bound."""
    out = _prepare_out(cfg)
    Ns = cfg.section("scan").integers("modes")
    floor = cfg.section("analysis").real("floor", 1e-20) if cfg.parser.has_section("analysis") else 1e-20
    points = _pmap(lambda N: _kdv_point(N, cfg), Ns, cfg.threads)
    rows_err, rows_ord, rows_pb = [], [], []
    summary = {}
    mus, maxes, Cs, sigmas, holds = [], [], [], [], []
    for N, (chain, mu, curve, k_abs, env) in zip(Ns, points):
        rows_err += [(t, N, mu, e) for t, e in zip(curve.times, curve.error)]
        rows_ord.append((mu, N, curve.max_error, curve.max_error / mu**3))
        sigma, C, ok = packet_bound(env, k_abs, mu, floor)
        bound = C * mu**4 * np.exp(-sigma * k_abs) + C * mu**5
        rows_pb += [(k, N, mu, e, b) for k, e, b in zip(k_abs, env, bound)]
        mus.append(mu)
        maxes.append(curve.max_error)
        Cs.append(C)
        sigmas.append(sigma)
        holds.append(ok)
        summary[f"max_error_N{N}"] = curve.max_error
        summary[f"packet_sigma_N{N}"] = sigma
        summary[f"packet_C_N{N}"] = C
    files = [
        write_csv(out / "error_curves.csv", ["t", "N", "mu", "sup_error"], rows_err, cfg),
        write_csv(out / "order_fit.csv", ["mu", "N", "max_error", "max_error_over_mu3"], rows_ord, cfg),
        write_csv(out / "packet_bound.csv", ["k", "N", "mu", "envelope_specific", "bound"], rows_pb, cfg),
    ]
    if len(mus) >= 2:
        slope, intercept, r2 = linear_fit(np.log(mus), np.log(maxes))
    else:
        slope = intercept = r2 = float("nan")
    summary.update(
        order=slope,
        order_intercept=intercept,
        order_r2=r2,
        packet_sigma_min=min(sigmas),
        packet_C_spread=max(Cs) / min(Cs),
        packet_bound_holds=all(holds),
    )
    files.append(_write_report(out, summary, cfg))
    return RunResult(cfg.name, summary, files)


# --------------------------------------------------------------------- toda-drift


def _toda_chain(N, model, A=1.0):
    return ChainParams.from_modes(N, PERIODIC, A=A, model=model)


def _spectrum_run(args):
    chain, state, integ = args
    traj = evolve(state, chain, integ)
    return traj.times, spectrum_drift(traj.q, traj.p, chain)


def _section_integrator(s, T, stride_default=100):
    return IntegratorConfig(s.real("dt", 0.05), s.text("scheme", "yoshida4"), T, s.integer("stride", stride_default))


def run_toda_drift(cfg: ExperimentConfig) -> RunResult:
    """Lax-spectrum drift (Toda flow, dt halving), A-scan under FPU flow,
    weighted action drift over a ``mu`` scan, and the Toda packet profile."""
    out = _prepare_out(cfg)
    files, summary = [], {}

    if cfg.enabled("spectrum"):
        s = cfg.section("spectrum")
        chain = _toda_chain(s.integer("modes", 15), TODA)
        state = single_mode(chain, s.real("specific_energy", 1e-4), k=s.integer("k", 1))
        dts = s.reals("dts", [0.1, 0.05, 0.025])
        T = s.real("T", 1e4)
        stride_time = s.real("sample_every", 10.0)
        jobs = [(chain, state, IntegratorConfig(dt, s.text("scheme", "yoshida4"), T, max(1, int(round(stride_time / dt))))) for dt in dts]
        res = _pmap(_spectrum_run, jobs, cfg.threads)
        rows, peaks = [], []
        for dt, (t, d) in zip(dts, res):
            rows += [(ti, dt, di) for ti, di in zip(t, d)]
            peaks.append(float(d.max()))
        files.append(write_csv(out / "spectrum_drift.csv", ["t", "dt", "drift"], rows, cfg))
        ratios = [float("nan")] + [peaks[i - 1] / peaks[i] for i in range(1, len(peaks))]
        files.append(write_csv(out / "spectrum_halving.csv", ["dt", "max_drift", "ratio_to_previous"], zip(dts, peaks, ratios), cfg))
        ref_dt = s.real("reference_dt", 0.05)
        if ref_dt in dts:
            summary["spectrum_drift_reference"] = peaks[dts.index(ref_dt)]
        summary["spectrum_halving_ratio_min"] = min(ratios[1:]) if len(ratios) > 1 else float("nan")
        summary["spectrum_halving_ratio_max"] = max(ratios[1:]) if len(ratios) > 1 else float("nan")

    if cfg.enabled("ascan"):
        s = cfg.section("ascan")
        N = s.integer("modes", 15)
        As = s.reals("A", [1.0, 2.0])
        T = s.real("T", 1e4)
        jobs = []
        for A in As:
            chain = _toda_chain(N, FPU, A)
            jobs.append((chain, packet_datum(chain, s.real("R", 1.0)), _section_integrator(s, T)))
        res = _pmap(_spectrum_run, jobs, cfg.threads)
        rows = []
        peaks = {}
        for A, (t, d) in zip(As, res):
            rows += [(ti, A, di) for ti, di in zip(t, d)]
            peaks[A] = float(d.max())
            summary[f"ascan_drift_A{A:g}"] = peaks[A]
        files.append(write_csv(out / "a_scan.csv", ["t", "A", "drift"], rows, cfg))
        if 1.0 in peaks and 2.0 in peaks:
            summary["ascan_ratio_A1_over_A2"] = peaks[1.0] / peaks[2.0]

    if cfg.enabled("weighted"):
        s = cfg.section("weighted")
        Ns = s.integers("modes", [16, 32, 64])
        sigma = s.real("sigma", 0.1)
        A = s.real("A", 2.0)
        R = s.real("R", 1.0)
        Tf = s.real("Tf", 1.0)
        samples = s.integer("samples", 200)
        dt = s.real("dt", 0.05)

        def point(N):
            chain = _toda_chain(N, FPU, A)
            T = Tf / chain.mu**3
            integ = IntegratorConfig(dt, s.text("scheme", "yoshida4"), T, max(1, int(T / dt / samples)))
            traj = evolve(packet_datum(chain, R), chain, integ)
            return chain.mu, traj.times, weighted_action_drift(traj.q, traj.p, chain, sigma)

        res = _pmap(point, Ns, cfg.threads)
        rows, fit_rows = [], []
        for N, (mu, t, d) in zip(Ns, res):
            rows += [(ti, N, mu, di, di / mu**4) for ti, di in zip(t, d)]
            fit_rows.append((mu, N, float(d.max())))
        files.append(write_csv(out / "weighted_drift.csv", ["t", "N", "mu", "drift", "drift_over_mu4"], rows, cfg))
        files.append(write_csv(out / "weighted_fit.csv", ["mu", "N", "max_drift"], fit_rows, cfg))
        if len(Ns) >= 2:
            slope, _, r2 = linear_fit(np.log([r[0] for r in fit_rows]), np.log([r[2] for r in fit_rows]))
            summary.update(weighted_exponent=slope, weighted_exponent_r2=r2)

    if cfg.enabled("profile"):
        s = cfg.section("profile")
        chain = _toda_chain(s.integer("modes", 15), TODA)
        R = s.real("R", 1.0)
        sigma = s.real("sigma", 1.0)
        T = s.real("T", 1e5)
        traj = evolve(packet_datum(chain, R), chain, _section_integrator(s, T))
        k_abs, Ek = fold_abs_k(traj.trace.k, traj.trace.specific)
        keep = k_abs <= chain.N
        k_abs, Ek = k_abs[keep], Ek[:, keep]
        prof = Ek * np.exp(2 * sigma * k_abs) / (R * R * chain.mu**4)
        early = traj.times <= s.real("early_fraction", 0.1) * T
        rows = [(t, k, e, w) for t, er, wr in zip(traj.times, Ek, prof) for k, e, w in zip(k_abs, er, wr)]
        files.append(write_csv(out / "packet_profile.csv", ["t", "k", "specific_energy", "weighted_profile"], rows, cfg))
        summary["profile_max"] = float(prof.max())
        summary["profile_growth"] = float(prof.max() / prof[early].max())

    files.append(_write_report(out, summary, cfg))
    return RunResult(cfg.name, summary, files)


# --------------------------------------------------------------------- gibbs-adiabatic


def _profile_from(s: Section) -> ModeProfile:
    fam = s.text("family", "raised_cosine")
    if fam == "constant":
        return ModeProfile.constant(s.real("value", 1.0))
    if fam == "raised_cosine":
        return ModeProfile.raised_cosine(s.real("center", 0.0), s.real("width", 0.25), s.integer("power", 2))
    if fam == "plateau":
        return ModeProfile.plateau(s.real("left", 0.0), s.real("right", 0.25), s.real("edge", 0.1))
    raise InvalidInputError(f"unknown profile family {fam!r}")


def run_gibbs_adiabatic(cfg: ExperimentConfig) -> RunResult:
    """Exceedance curves and ``t*(0.2)`` over a beta scan, autocorrelation of ``Phi_g``,
    and the ``g = 1`` control run."""
    out = _prepare_out(cfg)
    c = cfg.section("chain")
    chain = ChainParams.from_modes(c.integer("modes", 63), DIRICHLET, A=c.real("A", 1.0))
    g = cfg.section("gibbs")
    pr = cfg.section("probe")
    profile = _profile_from(pr)
    integ = _integrator(cfg)
    n_traj = pr.integer("n_traj", 200)
    delta1, delta2 = pr.real("delta1", 1.0), pr.real("delta2", 0.1)
    level = pr.real("drift_level", 0.2)
    beta_star = pr.real("beta_star", 0.0)

    def gibbs_cfg(beta, index):
        return GibbsConfig(
            beta=beta,
            chain=chain,
            burn_in=g.integer("burn_in", 5000),
            samples=g.integer("samples", 2000),
            thin=g.integer("thin", 50),
            seed=_sub_seed(cfg.seed, index),
        )

    betas = pr.reals("betas", [25.0, 50.0, 100.0])

    def point(ib):
        i, beta = ib
        return adiabatic_probe(profile, gibbs_cfg(beta, i), integ, delta1, delta2, n_traj, level, beta_star)

    results = _pmap(point, enumerate(betas), cfg.threads)
    exc_rows, ac_rows, ts_rows = [], [], []
    summary = {}
    for beta, r in zip(betas, results):
        exc_rows += [(t, beta, e, se, m) for t, e, se, m in zip(r.times, r.exceedance, r.exceedance_se, r.median_drift)]
        st = autocorrelation_from_run(r.run)
        ac_rows += [(t, beta, cv, se, cv / st.autocorr[0]) for t, cv, se in zip(st.times, st.autocorr, st.autocorr_se)]
        p_q = r.exceedance_at(beta / 4)
        ts_rows.append((beta, r.t_star, r.t_exceed, p_q, r.sigma_phi, r.n_traj, r.n_excluded))
        summary[f"t_star_beta{beta:g}"] = r.t_star
        summary[f"exceedance_quarter_beta{beta:g}"] = p_q
    files = [
        write_csv(out / "exceedance.csv", ["t", "beta", "exceedance", "exceedance_se", "median_drift"], exc_rows, cfg),
        write_csv(out / "autocorrelation.csv", ["t", "beta", "C", "C_se", "C_over_C0"], ac_rows, cfg),
        write_csv(
            out / "t_star.csv",
            ["beta", "t_star", "t_exceed", "exceedance_at_quarter_beta", "sigma_phi", "n_traj", "n_excluded"],
            ts_rows,
            cfg,
        ),
    ]
    tstars = np.array([r.t_star for r in results])
    if len(betas) >= 2 and np.all(np.isfinite(tstars)):
        slope, intercept, r2 = linear_fit(betas, tstars)
    else:
        slope = intercept = r2 = float("nan")
    summary.update(
        t_star_slope=slope,
        t_star_intercept=intercept,
        t_star_r2=r2,
        t_star_increasing=bool(np.all(np.isfinite(tstars)) and np.all(np.diff(tstars) > 0)),
        exceedance_quarter_beta_max=max(r.exceedance_at(b / 4) for b, r in zip(betas, results)),
    )

    if cfg.enabled("control"):
        s = cfg.section("control")
        beta = s.real("beta", 100.0)
        r = adiabatic_probe(ModeProfile.constant(1.0), gibbs_cfg(beta, len(betas)), integ, s.real("delta1", 0.5), delta2, n_traj)
        files.append(
            write_csv(out / "control.csv", ["t", "beta", "exceedance", "median_drift"], [(t, beta, e, m) for t, e, m in zip(r.times, r.exceedance, r.median_drift)], cfg)
        )
        summary["control_exceedance_max"] = float(r.exceedance.max())

    files.append(_write_report(out, summary, cfg))
    return RunResult(cfg.name, summary, files)


RUNNERS = {
    "fpu-recurrence": run_fpu_recurrence,
    "kdv-compare": run_kdv_compare,
    "toda-drift": run_toda_drift,
    "gibbs-adiabatic": run_gibbs_adiabatic,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    return RUNNERS[cfg.name](cfg)
