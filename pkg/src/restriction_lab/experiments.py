"""Built-in experiments. Each runner takes its merged parameters and the
config seed and returns an :class:`~restriction_lab.experiment.ExperimentResult`;
the lab writes the artifacts and turns failed checks into exit code 4.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .bessel import ENVELOPE_REGIMES, bessel_j, bessel_series, decay_ratio_grid, recurrence_residual, \
    verify_decay_envelope
from .discrete_restriction import PointConfiguration, axis_points, cap_cluster, conjecture_experiment, \
    lattice_points_on_circle, maximize_ratio, parabola_knots, parabola_ratio, random_separated, \
    ratio_statistic, separation_M
from .errors import NumericalResolutionError
from .experiment import ExperimentResult, experiment
from .grids_norms import ORIGIN, RadialGrid, mixed_norm_p22_coefficients
from .radial_multiplier import MultiplierSpec, RadialField, apply_Tm, apply_Ts, builtin_multiplier, \
    calibrate_c_grid, dilation_identity, lommel_check, operator_norm_estimate, planar_multiplier_oracle, \
    subordination_check
from .spherical import SphericalCoefficientField, ZGrid, harmonic_indices
from .surface_extension import BesselWeightedFamily, builtin_profile, claim_sweep, duality_pairing, \
    extend, extension_quotient, low_frequency_split, predicted_block_exponent, restriction_lemma_ratio

logger = logging.getLogger(__name__)


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def random_z_field(rng: np.random.Generator, n: int, k_max: int, z_grid: ZGrid,
                   modes: int = 4) -> SphericalCoefficientField:
    """Smooth random coefficients: low cosine modes in z with complex normal weights."""
    u = (z_grid.values - z_grid.z_min) / (z_grid.z_max - z_grid.z_min)
    entries = {}
    for idx in harmonic_indices(n, k_max):
        weights = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
        entries[idx] = sum(w * np.cos(np.pi * j * u) for j, w in enumerate(weights))
    return SphericalCoefficientField.from_entries(n, k_max, z_grid, entries)


@experiment("bessel-check", defaults={
    "nu_grid": [1, 2, 5, 10, 20, 50, 100, 200],
    "sample_density": 256,
    "series_samples": 32,
    "series_x_max": 30.0,
    "plot_nu": 20,
})
def bessel_check(params, seed):
    """Bessel decay envelopes on every regime window, with accuracy against
    the power series and the three-term recurrence."""
    result = ExperimentResult()
    nu_grid = [float(nu) for nu in params["nu_grid"]]

    report = verify_decay_envelope(nu_grid, params["sample_density"])
    if report.skipped:
        result.metrics["skipped_orders"] = report.skipped
    result.rows.extend({"check": "envelope", **row} for row in report.csv_rows())
    for regime in ENVELOPE_REGIMES:
        result.metrics[f"max_ratio_{regime.value}"] = report.max_ratio(regime)
    worst = report.worst()
    result.check("decay-envelope", report.ok,
                 "" if worst is None or report.ok else
                 f"{worst.regime.value} at nu={worst.nu:g}, r={worst.worst_r:.6g}: ratio {worst.max_ratio:.6g}")

    x_max = float(params["series_x_max"])
    xs = np.linspace(0.5, x_max, params["series_samples"])
    series_error = recurrence_error = 0.0
    for nu in (nu for nu in nu_grid if nu not in report.skipped):
        values = np.atleast_1d(bessel_j(nu, xs))
        errors = [_relative(v, ref) for v, ref in ((v, bessel_series(nu, float(x))) for v, x in zip(values, xs))
                  if abs(ref) > 1e-280]
        nu_series = max(errors, default=0.0)
        far = np.linspace(x_max, 2 * nu + 100, params["series_samples"])
        nu_recurrence = float(np.max(recurrence_residual(nu, far)))
        series_error = max(series_error, nu_series)
        recurrence_error = max(recurrence_error, nu_recurrence)
        result.rows.append({"check": "accuracy", "nu": nu, "series_rel_error": nu_series,
                            "recurrence_residual": nu_recurrence})

    result.metrics["series_rel_error"] = series_error
    result.metrics["recurrence_residual"] = recurrence_error
    result.check("series-accuracy", series_error <= 1e-10, f"max relative error {series_error:.3g}")
    result.check("recurrence-residual", recurrence_error <= 1e-9, f"max residual {recurrence_error:.3g}")

    for regime in ENVELOPE_REGIMES:
        r, ratio = decay_ratio_grid(float(params["plot_nu"]), regime, params["sample_density"])
        if r.size:
            result.plots[f"decay_{regime.value}"] = (r, ratio)
    return result


@experiment("discrete", seeded=True, defaults={
    "N": 25,
    "R_values": [100, 1000, 10000],
    "K": 12,
    "draws": 50,
    "ascent_iterations": 30,
    "side": 3.0,
})
def discrete(params, seed):
    """Discrete restriction ratio on circle lattice points and on
    sqrt(R)-separated random families."""
    result = ExperimentResult()
    rng = np.random.default_rng(seed)
    side = float(params["side"])

    single = PointConfiguration(2, 100.0, [[100.0, 0.0]], [1.0])
    single_ratio = ratio_statistic(single, side).ratio
    result.metrics["single_point_ratio"] = single_ratio
    result.check("single-point", abs(single_ratio - 1) <= 1e-6, f"ratio {single_ratio:.12g}")

    lattice = lattice_points_on_circle(int(params["N"]))
    if lattice.size:
        res = ratio_statistic(lattice, side)
        result.rows.append({"family": lattice.label, "R": lattice.radius, "K": lattice.size, "M": res.M,
                            "draw": "", "ratio": res.ratio, "step": res.scan.step, "engine": res.scan.engine})
    if params["N"] == 25:
        result.check("lattice-25-count", lattice.size == 12, f"{lattice.size} points on x^2+y^2=25")

    ratios = []
    for R in params["R_values"]:
        R = float(R)
        first = None
        for draw in range(params["draws"]):
            config = random_separated(R, params["K"], rng)
            if first is None:
                first = config
            res = ratio_statistic(config, side)
            ratios.append(res.ratio)
            result.rows.append({"family": config.label, "R": R, "K": config.size, "M": res.M, "draw": draw,
                                "ratio": res.ratio, "step": res.scan.step, "engine": res.scan.engine})
        if first is not None and params["ascent_iterations"] > 0:
            ascent = maximize_ratio(first, params["ascent_iterations"], seed=seed or 0, side=side)
            ratios.append(ascent.best_ratio)
            result.rows.append({"family": "ascent", "R": R, "K": first.size, "M": separation_M(first),
                                "draw": "ascent", "ratio": ascent.best_ratio, "step": "", "engine": ""})

    if ratios:
        spread = max(ratios) / float(np.median(ratios))
        result.metrics["max_over_median"] = spread
        result.check("uniform-in-R", spread <= 2.0, f"max/median ratio {spread:.4g} across R")
    return result


@experiment("parabola", defaults={
    "knots": 10,
    "separations": [1.0, 2.0],
    "refine": True,
    "side": 3.0,
})
def parabola(params, seed):
    """Windowed L^4 ratio for frequencies (t, t^2) at separated knots."""
    result = ExperimentResult()
    side = float(params["side"])

    single = parabola_ratio(parabola_knots(1), side).ratio
    result.metrics["single_knot_ratio"] = single
    result.check("single-knot", abs(single - 1) <= 1e-6, f"ratio {single:.12g}")

    for separation in params["separations"]:
        config = parabola_knots(params["knots"], float(separation))
        res = parabola_ratio(config, side)
        result.rows.append({"separation": separation, "K": config.size, "ratio": res.ratio,
                            "step": res.scan.step, "engine": res.scan.engine})

    if params["refine"]:
        config = parabola_knots(params["knots"], 1.0)
        coarse = parabola_ratio(config, side, engine="grid")
        fine = parabola_ratio(config, side, step=coarse.scan.step / 2, engine="grid")
        change = _relative(fine.ratio, coarse.ratio)
        result.metrics["refinement_change"] = change
        result.rows.append({"separation": 1.0, "K": config.size, "ratio": fine.ratio, "step": fine.scan.step,
                            "engine": "grid-refined"})
        result.check("refinement-stable", change <= 0.01, f"ratio moved {change:.3%} under step halving")
    return result


@experiment("conjecture3d", defaults={
    "R": 10.0,
    "cap_sizes": [1, 2, 4, 8, 16],
    "side": 1.5,
    "refine": True,
})
def conjecture3d(params, seed):
    """Windowed L^3 ratio on spheres in R^3; evidence for an unproven bound."""
    result = ExperimentResult(label="UNPROVEN")
    R, side = float(params["R"]), float(params["side"])

    axis = axis_points(R)
    res = conjecture_experiment(axis, side)
    result.rows.append({"family": axis.label, "R": R, "K": axis.size, "M": res.M, "ratio": res.ratio,
                        "sqrt_M": math.sqrt(res.M), "step": res.scan.step})
    if params["refine"]:
        try:
            fine = conjecture_experiment(axis, side, step=res.scan.step / 2)
        except NumericalResolutionError as e:
            logger.warning(f"refined 3-D scan skipped: {e.message}")
            result.metrics["refinement_change"] = None
        else:
            result.metrics["refinement_change"] = _relative(fine.ratio, res.ratio)

    trend = []
    for size in params["cap_sizes"]:
        cap = cap_cluster(R, int(size), dimension=3)
        cap_res = conjecture_experiment(cap, side)
        trend.append((cap_res.M, cap_res.ratio))
        result.rows.append({"family": cap.label, "R": R, "K": cap.size, "M": cap_res.M, "ratio": cap_res.ratio,
                            "sqrt_M": math.sqrt(cap_res.M), "step": cap_res.scan.step})

    if trend:
        m_values, ratio_values = zip(*trend)
        result.plots["cap_trend"] = (m_values, ratio_values)
        result.metrics["max_cap_ratio"] = max(ratio_values)
    return result


@experiment("extension", seeded=True, defaults={
    "profiles": ["cylinder", "bump"],
    "pairs": 10,
    "z_count": 256,
    "k_max": 4,
    "q": 6.0,
    "tolerance": 1e-6,
    "cross_r_max": 64,
})
def extension(params, seed):
    """Extension/restriction duality pairings and extension quotients on
    surfaces of revolution in R^3."""
    result = ExperimentResult()
    rng = np.random.default_rng(seed)
    q = float(params["q"])
    worst = routes = 0.0

    for name in params["profiles"]:
        profile = builtin_profile(name, params["z_count"])
        for pair in range(params["pairs"]):
            field = random_z_field(rng, 2, 0, profile.z_grid)
            sigma = float(rng.uniform(0.1, 0.3))
            center = float(rng.uniform(-2, 2))
            pairing = duality_pairing(field, profile, sigma=sigma, center=center)
            worst = max(worst, pairing.error)
            result.rows.append({"check": "duality", "profile": name, "pair": pair, "sigma": sigma,
                                "center": center, "lhs": abs(pairing.lhs), "rhs": abs(pairing.rhs),
                                "error": pairing.error})

        field = random_z_field(rng, 2, params["k_max"], profile.z_grid)
        quotient = extension_quotient(field, profile, q)
        result.rows.append({"check": "quotient", "profile": name, "q": q, "quotient": quotient.value,
                            "quotient_with_tail": quotient.value_with_tail})

        # the same numerator through the (rho, zeta) coefficient samples
        small = RadialGrid(params["cross_r_max"], panel_width=2.0)
        samples = extend(field, profile, small)
        routed = mixed_norm_p22_coefficients(samples.coefficients, small, samples.zeta.step, q, 2).value ** (1 / q)
        expected = extension_quotient(field, profile, q, small).numerator
        mismatch = _relative(routed, expected)
        routes = max(routes, mismatch)
        result.rows.append({"check": "numerator-routes", "profile": name, "q": q, "sampled": routed,
                            "energy": expected, "mismatch": mismatch})
        if "coefficients" not in result.tables:
            result.tables["coefficients"] = [{"profile": name, **row} for row in field.coefficient_rows()]

    result.metrics["duality_error"] = worst
    result.metrics["numerator_mismatch"] = routes
    result.check("duality", worst <= params["tolerance"], f"worst pairing mismatch {worst:.3g}")
    result.check("numerator-routes", routes <= 1e-8, f"relative mismatch {routes:.3g}")
    return result


@experiment("lemma-r3", defaults={
    "q": 5.0,
    "n": 2,
    "profile": "cylinder",
    "nu": 1.0,
    "r_max": 512,
    "fit_blocks": [3, 8],
    "tolerance": 0.3,
    "stability": 0.01,
})
def lemma_r3(params, seed):
    """Dyadic block decay of the Bessel-weighted restriction integral."""
    result = ExperimentResult()
    q, n = float(params["q"]), int(params["n"])
    profile = builtin_profile(params["profile"])
    family = BesselWeightedFamily.single(float(params["nu"]), profile.z_grid, n=n)
    lo, hi = params["fit_blocks"]
    blocks = range(int(lo), int(hi) + 1)

    grid = RadialGrid(params["r_max"], panel_width=2.0)
    report = restriction_lemma_ratio(family, profile, q, grid, blocks)
    extended = restriction_lemma_ratio(family, profile, q, grid.extended(), blocks)

    predicted = predicted_block_exponent(q, n)
    for row in report.block_rows():
        result.rows.append({**row, "predicted_slope": predicted})
    result.plots["blocks"] = ([m for m in report.radial.contributions if m != ORIGIN],
                              [math.log2(max(c, 1e-300)) for m, c in report.radial.contributions.items()
                               if m != ORIGIN])

    split = low_frequency_split(family, profile, q)
    result.metrics.update({
        "ratio": report.ratio,
        "ratio_with_tail": report.ratio_with_tail,
        "fitted_exponent": report.fitted_exponent,
        "predicted_exponent": predicted,
        "low_I": split.I,
        "low_II": split.II,
        "low_bound_I": split.bound_I,
        "low_bound_II": split.bound_II,
    })

    gap = abs(report.fitted_exponent - predicted)
    result.check("block-exponent", gap <= params["tolerance"],
                 f"fitted {report.fitted_exponent:.4g} vs predicted {predicted:.4g}")
    change = _relative(extended.ratio_with_tail, report.ratio_with_tail)
    result.metrics["r_max_doubling_change"] = change
    result.check("r_max-stable", change <= params["stability"], f"ratio moved {change:.3%} when r_max doubled")
    return result


@experiment("claim-dyadic", defaults={
    "q_values": [4.5, 5.0, 6.0],
    "blocks": [8, 16, 32, 64, 128, 256],
    "profile": "cylinder",
    "band": 2.0,
    "z_count": 64,
})
def claim_dyadic(params, seed):
    """Per-block claim bound with the constant frozen on the first block."""
    result = ExperimentResult()
    profile = builtin_profile(params["profile"], params["z_count"])

    def family(m_block: float) -> BesselWeightedFamily:
        return BesselWeightedFamily.spread(m_block / 2, 4 * m_block, profile.z_grid)

    for q in params["q_values"]:
        sweep = claim_sweep(family, profile, float(q), [float(b) for b in params["blocks"]], params["band"])
        for row in sweep.rows():
            result.rows.append({"q": q, **row})
        result.metrics[f"constant_q{q:g}"] = sweep.constant
        failed = [b.m for b in sweep.blocks if not b.ok]
        result.check(f"claim-q{q:g}", sweep.ok, f"bound exceeded on blocks m={failed}" if failed else "")
    return result


def _radial_grid(params) -> RadialGrid:
    return RadialGrid(params["r_max"], panel_width=params["panel_width"])


@experiment("multiplier", seeded=True, defaults={
    "multiplier": "bump",
    "a": 1.0,
    "b": 2.0,
    "n": 2,
    "k_max": 2,
    "p": 2.0,
    "r_max": 64,
    "panel_width": 0.5,
    "width": 1.0,
    "lommel_samples": 100,
    "oracle_size": 1024,
    "oracle_side": 200.0,
    "trials": 20,
})
def multiplier(params, seed):
    """Kernel identity, route cross-checks, the planar FFT oracle and the
    p = 2 bound for radial multipliers."""
    result = ExperimentResult()
    rng = np.random.default_rng(seed)
    a, b, n, p = float(params["a"]), float(params["b"]), int(params["n"]), float(params["p"])
    grid = _radial_grid(params)

    evals = lommel_check(MultiplierSpec.constant(a, b), rng, params["lommel_samples"])
    lommel = max((e.error for e in evals), default=0.0)
    result.rows.extend({"check": "lommel", **e.row()} for e in evals)
    result.metrics["lommel_error"] = lommel
    result.check("kernel-boundary-identity", lommel <= 1e-8, f"max deviation {lommel:.3g}")

    field = RadialField.random(rng, n, params["k_max"])
    linear = MultiplierSpec.linear(a, b)
    decomposed = apply_Tm(field, linear, grid)
    direct = apply_Tm(field, linear, grid, route="direct")
    routes = decomposed.combine(direct, 1.0, -1.0).norm(p) / max(direct.norm(p), 1e-300)
    result.metrics["route_mismatch"] = routes
    result.rows.append({"check": "routes", "multiplier": "linear", "mismatch": routes})
    result.check("decomposition-vs-direct", routes <= 1e-6, f"relative mismatch {routes:.3g}")

    spec = builtin_multiplier(params["multiplier"], a, b)
    gaussian = RadialField.gaussian(n, params["width"])
    transformed = apply_Tm(gaussian, spec, grid).norm_estimate(p)
    ours = transformed.value
    if n == 2:
        oracle = planar_multiplier_oracle(gaussian, spec, p, params["oracle_size"], params["oracle_side"])
        mismatch = _relative(ours, oracle)
        result.metrics["planar_mismatch"] = mismatch
        result.rows.append({"check": "planar", "multiplier": spec.name, **transformed.row(), "oracle": oracle,
                            "mismatch": mismatch})
        result.check("planar-oracle", mismatch <= 1e-3, f"relative mismatch {mismatch:.3g}")

    if p == 2:
        estimate = operator_norm_estimate(lambda f: apply_Tm(f, spec, grid, route="direct"), p, grid,
                                          params["trials"], seed or 0, n, params["k_max"])
        result.metrics["p2_norm_estimate"] = estimate
        result.metrics["sup_m"] = spec.sup
        result.rows.append({"check": "parseval", "multiplier": spec.name, "norm": estimate, "sup_m": spec.sup})
        result.check("parseval-bound", estimate <= spec.sup + 1e-6,
                     f"estimate {estimate:.8g} vs sup|m| {spec.sup:.8g}")
    return result


@experiment("ts-sweep", seeded=True, defaults={
    "s_values": [0.5, 1.0, 2.0, 4.0],
    "p": 2.0,
    "n": 2,
    "k_max": 1,
    "r_max": 64,
    "panel_width": 0.5,
    "trials": 5,
    "identity_nodes": 64,
})
def ts_sweep(params, seed):
    """Dilation identity of T^s and the s-uniformity of its norm estimates."""
    result = ExperimentResult()
    rng = np.random.default_rng(seed)
    n, p = int(params["n"]), float(params["p"])
    r = np.linspace(0.1, 20.0, params["identity_nodes"])

    worst = 0.0
    estimates = []
    for s in params["s_values"]:
        s = float(s)
        field = RadialField.random(rng, n, params["k_max"])
        lhs, rhs = dilation_identity(field, s, r)
        error = float(np.max(np.abs(lhs - rhs)) / max(float(np.max(np.abs(rhs))), 1e-300))
        worst = max(worst, error)

        grid = RadialGrid(params["r_max"] / s, panel_width=params["panel_width"] / s)
        estimate = operator_norm_estimate(lambda f, s=s, grid=grid: apply_Ts(f, s, grid), p, grid,
                                          params["trials"], seed or 0, n, params["k_max"], dilation=s)
        estimates.append(estimate)
        result.rows.append({"s": s, "identity_error": error, "norm_estimate": estimate})

    spread = max(estimates) / min(estimates) - 1 if estimates and min(estimates) > 0 else math.inf
    result.metrics["identity_error"] = worst
    result.metrics["norm_spread"] = spread
    result.check("dilation-identity", worst <= 1e-6, f"max relative deviation {worst:.3g}")
    result.check("uniform-in-s", spread <= 0.01, f"norm estimates spread {spread:.3%}")
    return result


@experiment("subordination", seeded=True, defaults={
    "multiplier": "linear",
    "a": 1.0,
    "b": 2.0,
    "p": 1.5,
    "n": 2,
    "k_max": 1,
    "r_max": 32,
    "panel_width": 0.5,
    "fields": 20,
    "calibration_trials": 5,
})
def subordination(params, seed):
    """||T_m f|| against the subordination budget and (sup|m| + TV(m)) ||f||."""
    result = ExperimentResult()
    rng = np.random.default_rng(seed)
    spec = builtin_multiplier(params["multiplier"], float(params["a"]), float(params["b"]))
    n, p, k_max = int(params["n"]), float(params["p"]), params["k_max"]
    grid = _radial_grid(params)

    # calibration fields come from a stream disjoint from the checked ones
    c_grid = calibrate_c_grid(spec, p, grid, n, k_max, params["calibration_trials"], (seed or 0) + 1)
    result.metrics["c_grid"] = c_grid
    result.rows.append({"check": "calibration", "c_grid": c_grid, "trials": params["calibration_trials"]})

    failed = []
    for index in range(params["fields"]):
        field = RadialField.random(rng, n, k_max)
        report = subordination_check(field, spec, p, grid, c_grid)
        result.rows.append({"check": "field", "field": index, "lhs": report.lhs, "lhs_tail": report.lhs_tail,
                            "rhs": report.rhs, "budget": report.budget_total, "c_grid": report.c_grid,
                            "bound": report.constant * report.rhs, "ok": report.ok})
        result.rows.extend({"check": "budget", "field": index, **row} for row in report.budget_rows())
        if index == 0:
            result.plots["budget"] = ([term.s for term in report.budget],
                                      [term.contribution for term in report.budget])
        if not report.ok:
            failed.append(index)

    result.check("subordination", not failed, f"budget exceeded for fields {failed}" if failed else "")
    return result
