"""Monte Carlo experiments probing the invariance theorems at desk scale.

Both invariance experiments exploit the exact finite-volume facts: the
truncated free-boundary lattice flow conserves the product amplitude measure,
and the joint law (Haar gauge) x (amplitude measure) pushes forward to the
Gibbs chain law on the spins at every time.  So at any sample time the
tested statistics have their exact target distributions, up to Monte Carlo
and integration error; thresholds (3 standard errors, KS at 0.01 with
Bonferroni) are pre-registered in `stats`.

Gauge handling: the anchor frame is factored as P_0(t) = O Phi(t) with Phi
integrated from the identity alongside the amplitudes.  The random gauge O
then only enters statistics that are not rotation invariant (single-spin
means, regression on a fixed axis); bond dot products are computed from the
O-independent relative frames, so a rigid rotation of the initial ensemble
leaves them bit-for-bit unchanged.

Stream allocation (documented, fixed): ensemble member i draws from
RngStream(seed, i) -- amplitudes first, then the gauge quaternion; reference
spin chains use RngStream(seed, 2^32 + j) for sample time index j.

Truncation convergence runs each (K, 2K) pair in lockstep: the two systems
are concatenated into one state so they share every accepted step.  Interior
sites then stay bitwise identical until genuine boundary influence arrives,
keeping the measured gap functional far below any tolerance floor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rk
from .core import (Beta, IntegrationError, ParameterError, RngStream,
                   Window, japanese_bracket)
from .dynamics import (IntegratorConfig, al_rhs, frame_generator,
                       _pack_complex, _unpack_complex)
from .hasimoto import reorthonormalize_block, transport_rotation_block
from .sampling import (sample_gibbs_chain_block, sample_haar_rotation_block,
                       sample_white_noise_block, white_noise_sqmod_cdf)
from .stats import (apply_bonferroni, correlation_check, ks_two_sample,
                    ks_uniform, mean_check, slope_check)

_REFERENCE_STREAM_BASE = 2 ** 32


@dataclass(frozen=True)
class EnsembleSpec:
    beta: Beta
    window: Window
    n_ensembles: int
    t_final: float
    sample_times: tuple
    seed: int
    integrator: IntegratorConfig = IntegratorConfig(
        rel_tol=1e-6, abs_tol=1e-8, max_step=0.25)

    def __post_init__(self):
        if self.n_ensembles < 1:
            raise ParameterError("need at least one ensemble member")
        ts = np.asarray(self.sample_times, dtype=float)
        if ts.size == 0 or np.any(np.diff(ts) <= 0):
            raise ParameterError("sample times must be strictly increasing")
        if ts[0] < 0 or ts[-1] > self.t_final + 1e-12:
            raise ParameterError("sample times must lie in [0, t_final]")
        if -self.window.lo != self.window.hi:
            raise ParameterError("invariance experiments use symmetric windows")

    @property
    def half_width(self) -> int:
        return self.window.hi

    def interior_slice(self) -> slice:
        """Sites |n| <= K/2, suppressing free-boundary artifacts."""
        k = self.half_width
        return slice(k - k // 2, k + k // 2 + 1)


@dataclass
class EnsembleReport:
    kind: str
    spec_meta: dict
    statistics: list = field(default_factory=list)
    ks_tests: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def finalize(self, alpha: float = 0.01) -> "EnsembleReport":
        apply_bonferroni(self.ks_tests, alpha)
        self.verdicts["moments"] = all(s.passed for s in self.statistics)
        self.verdicts["ks"] = all(k.passed for k in self.ks_tests)
        self.verdicts["overall"] = all(self.verdicts.values())
        return self

    @property
    def passed(self) -> bool:
        return bool(self.verdicts.get("overall", False))

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec_meta,
            "statistics": [s.as_dict() for s in self.statistics],
            "ks_tests": [k.as_dict() for k in self.ks_tests],
            "verdicts": self.verdicts,
            "notes": self.notes,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def _spec_meta(spec: EnsembleSpec, extra: dict | None = None) -> dict:
    meta = {"beta": spec.beta.value, "K": spec.half_width,
            "n_ensembles": spec.n_ensembles, "t_final": spec.t_final,
            "sample_times": list(spec.sample_times), "seed": spec.seed}
    if extra:
        meta.update(extra)
    return meta


def _draw_ensemble_amplitudes(spec: EnsembleSpec,
                              with_gauge: bool) -> tuple[np.ndarray, np.ndarray]:
    """Initial data, one independent stream per member."""
    n_sites = len(spec.window)
    vals = np.empty((spec.n_ensembles, n_sites), dtype=np.complex128)
    gauges = np.empty((spec.n_ensembles, 3, 3)) if with_gauge else None
    for i in range(spec.n_ensembles):
        gen = RngStream(spec.seed, i).generator()
        vals[i] = sample_white_noise_block(spec.beta, spec.window, gen, 1)[0]
        if with_gauge:
            gauges[i] = sample_haar_rotation_block(gen, 1)[0]
    return vals, gauges


# --------------------------------------------------------------------------
# Amplitude-measure invariance
# --------------------------------------------------------------------------

def wn_invariance_experiment(spec: EnsembleSpec) -> EnsembleReport:
    """Evolve an amplitude-measure ensemble and test that the per-site law,
    its moments, and cross-site independence are unchanged at every time."""
    b = spec.beta.value
    vals, _ = _draw_ensemble_amplitudes(spec, with_gauge=False)
    y0 = _pack_complex(vals)

    def rhs(t, y):
        return _pack_complex(al_rhs(_unpack_complex(y), "free"))

    n_sites = len(spec.window)

    def namer(member, comp):
        return f"ensemble member {member}, site {spec.window.lo + comp % n_sites}"

    times = np.asarray(spec.sample_times, dtype=float)
    try:
        res = rk.integrate_batch(rhs, y0, times, spec.integrator.rel_tol,
                                 spec.integrator.abs_tol,
                                 spec.integrator.max_step,
                                 component_namer=namer)
    except IntegrationError as exc:
        raise IntegrationError(
            f"ensemble integration failed: {exc}", t=exc.t, site=exc.site)

    report = EnsembleReport("wn_invariance", _spec_meta(spec))
    interior = spec.interior_slice()
    k = spec.half_width
    target_log = 1.0 / (1.0 + 2.0 * b)
    corr_bonds = sorted({0, -(k // 4), k // 4})

    for j, t in enumerate(times):
        z = _unpack_complex(res.samples[j])
        sq = np.abs(z) ** 2
        logs = np.log1p(sq[:, interior])

        # (i) per-site law of |a_n|^2, pooled over interior sites and at the
        # center site alone
        u_pool = white_noise_sqmod_cdf(sq[:, interior].ravel(), spec.beta)
        report.ks_tests.append(ks_uniform(f"ks_sqmod_interior_t={t:g}", u_pool))
        u_site = white_noise_sqmod_cdf(sq[:, k], spec.beta)
        report.ks_tests.append(ks_uniform(f"ks_sqmod_site0_t={t:g}", u_site))

        # (ii) moment of log(1 + |a|^2): per-member spatial means are i.i.d.
        report.statistics.append(mean_check(
            f"mean_log_sqmod_t={t:g}", logs.mean(axis=1), target_log))

        # (iii) independence proxy: neighbor correlations of log(1 + |a|^2)
        for n in corr_bonds:
            i = k + n
            report.statistics.append(correlation_check(
                f"corr_log_sqmod_sites_{n}_{n + 1}_t={t:g}",
                np.log1p(sq[:, i]), np.log1p(sq[:, i + 1])))
    return report.finalize()


# --------------------------------------------------------------------------
# Gibbs-measure invariance through the randomized gauge
# --------------------------------------------------------------------------

def _evolve_with_frames(spec: EnsembleSpec,
                        gauge_rotation: np.ndarray | None = None):
    """Evolve (amplitudes, identity-anchored frame factor) and return spins.

    Returns (times, dots, spins) with dots[j]: (members, n_bonds) the
    gauge-free bond dot products at sample time j, and spins[j]:
    (members, n_sites, 3) the gauged spins O G_n e3.
    """
    vals, gauges = _draw_ensemble_amplitudes(spec, with_gauge=True)
    if gauge_rotation is not None:
        gauges = np.einsum("ij,bjk->bik", np.asarray(gauge_rotation), gauges)
    n_sites = len(spec.window)
    two_m = 2 * n_sites
    i0 = spec.window.index(0)

    y0 = np.concatenate([_pack_complex(vals),
                         np.tile(np.eye(3).reshape(9), (spec.n_ensembles, 1))],
                        axis=1)

    def rhs(t, y):
        z = _unpack_complex(y[:, :two_m])
        phi = y[:, two_m:].reshape(-1, 3, 3)
        dz = al_rhs(z, "free")
        gen = frame_generator(z[:, i0], z[:, i0 - 1])
        dphi = np.matmul(phi, gen)
        return np.concatenate([_pack_complex(dz), dphi.reshape(-1, 9)], axis=1)

    def post(y):
        phi = y[:, two_m:].reshape(-1, 3, 3)
        fixed = reorthonormalize_block(phi)
        drift = np.max(np.abs(fixed - phi).reshape(y.shape[0], -1), axis=1)
        out = y.copy()
        out[:, two_m:] = fixed.reshape(-1, 9)
        return out, drift

    def namer(member, comp):
        if comp >= two_m:
            return f"ensemble member {member}, anchor frame"
        return f"ensemble member {member}, site {spec.window.lo + comp % n_sites}"

    times = np.asarray(spec.sample_times, dtype=float)
    res = rk.integrate_batch(rhs, y0, times, spec.integrator.rel_tol,
                             spec.integrator.abs_tol, spec.integrator.max_step,
                             post_accept=post, component_namer=namer)

    all_dots, all_spins = [], []
    for j in range(len(times)):
        z = _unpack_complex(res.samples[j][:, :two_m])
        phi = reorthonormalize_block(res.samples[j][:, two_m:].reshape(-1, 3, 3))
        # relative frames from the anchor; spins live on [lo, hi + 1]
        tilde = np.empty((spec.n_ensembles, n_sites + 1, 3))
        cur = phi
        tilde[:, i0] = cur[:, :, 2]
        for i in range(i0, n_sites):
            cur = np.matmul(cur, transport_rotation_block(z[:, i]))
            tilde[:, i + 1] = cur[:, :, 2]
        cur = phi
        for i in range(i0 - 1, -1, -1):
            cur = np.matmul(cur,
                            transport_rotation_block(z[:, i]).transpose(0, 2, 1))
            tilde[:, i] = cur[:, :, 2]
        dots = np.sum(tilde[:, :-1] * tilde[:, 1:], axis=2)
        spins = np.einsum("bij,bnj->bni", gauges, tilde)
        all_dots.append(dots)
        all_spins.append(spins)
    return times, all_dots, all_spins, res.max_post_drift


def gibbs_invariance_experiment(spec: EnsembleSpec,
                                gauge_rotation: np.ndarray | None = None
                                ) -> EnsembleReport:
    """Spin-chain law along the gauge-randomized transform pipeline.

    At every sample time: nearest-neighbor alignment moment, single-spin
    mean, two-sample KS of the bond dot population against a freshly sampled
    Gibbs chain, and the Markov transition slope on a fixed axis.
    """
    b = spec.beta.value
    times, all_dots, all_spins, frame_drift = _evolve_with_frames(
        spec, gauge_rotation)
    report = EnsembleReport("gibbs_invariance", _spec_meta(spec))
    report.notes["max_frame_renormalization"] = frame_drift

    k = spec.half_width
    # bond arrays index bonds (n, n+1) by n - lo; interior bonds |n| <= k/2 - 1
    bond_sel = slice(k - k // 2, k + k // 2)
    target_dot = b / (1.0 + b)

    for j, t in enumerate(times):
        dots = all_dots[j][:, bond_sel]
        spins = all_spins[j][:, bond_sel, :]

        # (i) nearest-neighbor alignment: per-member spatial means are i.i.d.
        report.statistics.append(mean_check(
            f"mean_dot_t={t:g}", dots.mean(axis=1), target_dot))

        # (ii) single-spin mean vanishes, component by component
        for comp, label in enumerate("xyz"):
            report.statistics.append(mean_check(
                f"mean_spin_{label}_t={t:g}",
                spins[:, :, comp].mean(axis=1), 0.0))

        # (iii) two-sample KS of the dot population vs a fresh Gibbs chain
        ref_gen = RngStream(spec.seed, _REFERENCE_STREAM_BASE + j).generator()
        ref = sample_gibbs_chain_block(spec.beta, spec.window, ref_gen,
                                       spec.n_ensembles)
        ref_dots = np.sum(ref[:, :-1] * ref[:, 1:], axis=2)[:, bond_sel]
        report.ks_tests.append(ks_two_sample(
            f"ks_dot_vs_fresh_t={t:g}", dots.ravel(), ref_dots.ravel()))

        # (iv) Markov transition slope E[S_{n+1}.v | S_n] = lambda_1 S_n.v,
        # on non-overlapping bonds so regression samples are independent
        x = all_spins[j][:, bond_sel, 2][:, ::2].ravel()
        y2 = all_spins[j][:, bond_sel.start + 1:bond_sel.stop + 1, 2][:, ::2].ravel()
        report.statistics.append(slope_check(
            f"markov_slope_t={t:g}", x, y2, target_dot))
    return report.finalize()


# --------------------------------------------------------------------------
# Truncation convergence (lockstep pairs)
# --------------------------------------------------------------------------

def _lockstep_gap_curve(alpha0: np.ndarray, k_small: int, k_big: int,
                        times: np.ndarray, cfg: IntegratorConfig,
                        weight_rate: float = 4.0) -> np.ndarray:
    """Weighted gap between truncations K and K' of the same data, sharing
    every accepted step (one concatenated state)."""
    k_max = (alpha0.shape[0] - 1) // 2
    ns, nb = 2 * k_small + 1, 2 * k_big + 1
    a_small = alpha0[k_max - k_small:k_max + k_small + 1]
    a_big = alpha0[k_max - k_big:k_max + k_big + 1]
    y0 = np.concatenate([_pack_complex(a_small), _pack_complex(a_big)])[None, :]

    def rhs(t, y):
        za = _unpack_complex(y[:, :2 * ns])
        zb = _unpack_complex(y[:, 2 * ns:])
        return np.concatenate([_pack_complex(al_rhs(za, "free")),
                               _pack_complex(al_rhs(zb, "free"))], axis=1)

    res = rk.integrate_batch(rhs, y0, times, cfg.rel_tol, cfg.abs_tol,
                             cfg.max_step)
    sites = np.arange(-k_big, k_big + 1)
    weights = np.exp(-weight_rate * japanese_bracket(sites))
    off = k_big - k_small
    gaps = np.empty(len(times))
    for j in range(len(times)):
        za = _unpack_complex(res.samples[j][0, :2 * ns])
        zb = _unpack_complex(res.samples[j][0, 2 * ns:])
        diff = zb.copy()
        diff[off:off + ns] -= za
        gaps[j] = float(np.sum(weights * np.abs(diff) ** 2))
    return gaps


def truncation_convergence_experiment(beta: Beta, k_list, t_final: float,
                                      seed: int,
                                      cfg: IntegratorConfig = IntegratorConfig(),
                                      n_times: int = 9) -> dict:
    """Gap functional between consecutive truncations of one data draw.

    One amplitude draw on the largest window; for each consecutive pair
    (K, K') the truncated flows run in lockstep and the weighted gap (rate 4)
    is sampled on a uniform grid; the report carries sup-in-time values and
    per-pair ratios.
    """
    k_list = [int(k) for k in k_list]
    if len(k_list) < 2 or any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ParameterError("k_list must be increasing with >= 2 entries")
    k_max = k_list[-1]
    alpha0 = sample_white_noise_block(
        Beta(beta.value), Window.symmetric(k_max),
        RngStream(seed, 0), 1)[0]
    times = np.linspace(0.0, t_final, n_times)
    pairs, sup_gaps, curves = [], [], []
    for k_small, k_big in zip(k_list[:-1], k_list[1:]):
        gaps = _lockstep_gap_curve(alpha0, k_small, k_big, times, cfg)
        pairs.append((k_small, k_big))
        sup_gaps.append(float(np.max(gaps)))
        curves.append(gaps.tolist())
    ratios = [sup_gaps[i + 1] / sup_gaps[i] if sup_gaps[i] > 0 else float("nan")
              for i in range(len(sup_gaps) - 1)]
    return {"beta": beta.value, "t_final": t_final, "seed": seed,
            "pairs": pairs, "sup_gap": sup_gaps, "ratios": ratios,
            "times": times.tolist(), "gap_curves": curves,
            "strictly_decreasing": all(a > b for a, b in
                                       zip(sup_gaps, sup_gaps[1:]))}


# --------------------------------------------------------------------------
# Uniqueness mechanism probe
# --------------------------------------------------------------------------

def uniqueness_probe(beta: Beta, window: Window, t_final: float,
                     perturbation: float, seed: int,
                     cfg: IntegratorConfig = IntegratorConfig(),
                     interior_half_width: int = 8) -> dict:
    """Interior insensitivity to edge data over a fixed time.

    One field is evolved three ways: as is, at ten-fold tightened
    tolerances, and with a real perturbation added at the top edge site.
    The report gives the weighted interior gap (rate 4, sites
    |n| <= interior_half_width) against both variants at a grid of times.
    """
    if perturbation < 0:
        raise ParameterError("perturbation must be nonnegative")
    alpha0 = sample_white_noise_block(beta, window,
                                      RngStream(seed, 0), 1)[0]
    perturbed = alpha0.copy()
    perturbed[-1] += perturbation
    times = np.linspace(0.0, t_final, 5)

    def run(a0, config):
        def rhs(t, y):
            return _pack_complex(al_rhs(_unpack_complex(y), "free"))
        res = rk.integrate_batch(rhs, _pack_complex(a0)[None, :], times,
                                 config.rel_tol, config.abs_tol,
                                 config.max_step)
        return np.array([_unpack_complex(res.samples[j][0])
                         for j in range(len(times))])

    tight = IntegratorConfig(max(1e-14, cfg.rel_tol / 10.0),
                             cfg.abs_tol / 10.0, cfg.max_step)
    base = run(alpha0, cfg)
    refined = run(alpha0, tight)
    shifted = run(perturbed, cfg)

    sites = window.sites()
    mask = np.abs(sites) <= interior_half_width
    weights = np.exp(-4.0 * japanese_bracket(sites[mask]))

    def interior_gap(a, b):
        return [float(np.sum(weights * np.abs(a[j][mask] - b[j][mask]) ** 2))
                for j in range(len(times))]

    return {"beta": beta.value, "seed": seed, "perturbation": perturbation,
            "window": [window.lo, window.hi], "times": times.tolist(),
            "interior_half_width": interior_half_width,
            "tolerance_gap": interior_gap(base, refined),
            "perturbation_gap": interior_gap(base, shifted),
            "perturbation_gap_final": interior_gap(base, shifted)[-1]}
