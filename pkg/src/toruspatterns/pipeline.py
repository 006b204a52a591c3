"""End-to-end orchestration: construct, solve, verify, report.

A Pipeline lazily builds and caches each stage (profile, reaction term,
base pattern, ripple branch, spectra, first-order analysis, census,
probes) for one RunConfig, then assembles the verification report: one
row per desk-checkable claim with its measured values.  Timings are kept
out of the report payload so identical runs produce identical bytes.
"""

from __future__ import annotations

import os
import time
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import census as census_mod
from . import dynamics, fieldio, perturbation, spectral, steady
from .config import RunConfig
from .errors import NoConvergence, SingularJacobian, TorusPatternsError
from .geometry import TorusParams, laplace_coefficients, metric_at
from .operators import PeriodicGrid, assemble_laplacian, quadrature
from .profiles import (ProfileConfig, build_profile, extend_symmetric,
                       forge_nonlinearity, threshold_waves)

__all__ = ["Pipeline", "operator_consistency_orders"]

# the unperturbed-stability claim is pinned to this resolution
STABILITY_GRID = (128, 512)


def operator_consistency_orders(params: TorusParams, sizes=(64, 128, 256)):
    """Max-norm error of the assembled operator on cos(phi) against the
    closed form, and the observed convergence orders between grids."""
    errors = []
    base = params.with_epsilon(0.0)
    for n in sizes:
        grid = PeriodicGrid(n, n)
        op = assemble_laplacian(base, grid)
        phi, theta = grid.mesh()
        u = np.cos(phi) * np.ones_like(theta)
        r, R = base.r, base.R
        p = R + r * np.cos(phi)
        exact = (-np.cos(phi) / r ** 2 + np.sin(phi) ** 2 / (r * p)) \
            * np.ones_like(theta)
        errors.append(float(np.max(np.abs(op.apply(u) - exact))))
    orders = [float(np.log2(errors[k] / errors[k + 1]))
              for k in range(len(errors) - 1)]
    return errors, orders


def _interp_to_refined(field: np.ndarray, grid: PeriodicGrid,
                       fine: PeriodicGrid) -> np.ndarray:
    pad = np.pad(field, ((0, 1), (0, 1)), mode="wrap")
    interp = RegularGridInterpolator(
        (np.append(grid.phi, 2 * np.pi), np.append(grid.theta, 2 * np.pi)),
        pad, method="cubic")
    pp, tt = np.meshgrid(fine.phi, fine.theta, indexing="ij")
    pts = np.stack([pp.ravel(), tt.ravel()], axis=1)
    return interp(pts).reshape(fine.n_phi, fine.n_theta)


class Pipeline:
    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self._cache = {}
        self.timings = {}

    def _timed(self, key, fn):
        if key not in self._cache:
            t0 = time.perf_counter()
            self._cache[key] = fn()
            self.timings[key] = time.perf_counter() - t0
        return self._cache[key]

    # construction ---------------------------------------------------------

    @property
    def profile(self):
        return self._timed("profile", lambda: build_profile(
            self.config.profile, self.config.params))

    @property
    def pattern(self):
        return self._timed("pattern", lambda: extend_symmetric(self.profile))

    @property
    def nonlinearity(self):
        return self._timed("nonlinearity", lambda: forge_nonlinearity(
            self.profile, self.config.params))

    @property
    def threshold(self):
        return self._timed("threshold", lambda: threshold_waves(
            self.nonlinearity, self.config.params))

    # base state and branch -------------------------------------------------

    def _solve_base(self, grid: PeriodicGrid):
        params0 = self.config.params.with_epsilon(0.0)
        op0 = assemble_laplacian(params0, grid)
        initial = self.pattern.sample_field(grid)
        state = steady.newton_solve(initial, op0, self.nonlinearity,
                                    tol=self.config.tol("newton_tol"))
        return state, op0

    @property
    def base(self):
        return self._timed("base", lambda: self._solve_base(self.config.grid))[0]

    @property
    def base_operator(self):
        self.base
        return self._cache["base"][1]

    def state_at(self, eps: float) -> steady.SteadyState:
        """Steady state at a ripple amplitude, chained through the branch."""
        branch = self._timed("branch", dict)
        if eps == 0.0:
            return self.base
        if eps not in branch:
            done = sorted(e for e in branch if 0.0 < e < eps)
            start = branch[done[-1]] if done else self.base
            gap = eps - start.params.epsilon
            # adjacent ladder entries are one Newton hop; big jumps quartered
            steps = 1 if done and gap <= max(start.params.epsilon, 1e-4) else 4
            result = steady.continuation(start, self.nonlinearity, eps,
                                         steps=steps,
                                         tol=self.config.tol("newton_tol"))
            branch[eps] = result.final
        return branch[eps]

    def branch_states(self):
        return [self.state_at(e) for e in sorted(self.config.epsilon_list)]

    # spectra ---------------------------------------------------------------

    @property
    def sl_result(self):
        def run():
            vals = self.base.field[:, 0]
            return spectral.sl_reduction_eigpair(
                vals, self.nonlinearity, self.config.params.with_epsilon(0.0),
                n_points=vals.size)
        return self._timed("sl_result", run)

    @property
    def spectrum_base(self):
        def run():
            return spectral.principal_eigpair(
                self.base, self.base_operator, self.nonlinearity,
                tol=self.config.tol("eigen_tol"),
                lambda_est=self.sl_result.lambda1)
        return self._timed("spectrum_base", run)

    def spectrum_at(self, eps: float):
        if eps == 0.0:
            return self.spectrum_base
        spectra = self._timed("spectra", dict)
        if eps not in spectra:
            state = self.state_at(eps)
            op = assemble_laplacian(state.params, state.grid)
            spectra[eps] = spectral.principal_eigpair(
                state, op, self.nonlinearity,
                tol=self.config.tol("eigen_tol"),
                lambda_est=self.spectrum_base.lambda1)
        return spectra[eps]

    # first-order analysis ---------------------------------------------------

    @property
    def perturbation_solution(self):
        def run():
            return perturbation.first_order_analysis(
                self.pattern, self.nonlinearity, self.config.params,
                n=self.config.params.n_waves, threshold_n=self.threshold.n_min)
        return self._timed("perturbation_solution", run)

    @property
    def perturbation_verdicts(self):
        cfg = self.config
        return self._timed("perturbation_verdicts", lambda: (
            perturbation.perturbation_verdicts(
                self.perturbation_solution, cfg.params,
                c1_tol=cfg.tol("c1_tol"),
                deriv_tol=cfg.tol("c2_deriv_tol"),
                floor_rel=cfg.tol("c2_floor_rel"),
                integral_tol=cfg.tol("integral_tol"))))

    @property
    def first_order_comparison(self):
        def run():
            return perturbation.compare_with_newton(
                self.branch_states(), self.base, self.nonlinearity,
                self.config.params.n_waves)
        return self._timed("first_order_comparison", run)

    # census ------------------------------------------------------------------

    def census_at(self, eps: float, grid: PeriodicGrid | None = None):
        grid = grid or self.config.grid
        if grid is self.config.grid:
            state = self.state_at(eps)
        else:
            coarse = self.state_at(eps)
            guess = _interp_to_refined(coarse.field, self.config.grid, grid)
            op = assemble_laplacian(coarse.params, grid)
            state = steady.newton_solve(guess, op, self.nonlinearity,
                                        tol=self.config.tol("newton_tol"))
        report = census_mod.locate_critical_points(
            state.field, state.params, grid,
            threshold_rel=self.config.tol("census_grad_rel"))
        verdict = census_mod.verify_count(
            report, state.params,
            match_cells=self.config.tol("census_match_cells"))
        return report, verdict, state

    # dynamics -----------------------------------------------------------------

    def probe_traces(self):
        def run():
            cfg = self.config
            params0 = cfg.params.with_epsilon(0.0)
            op0 = assemble_laplacian(params0, cfg.probe_grid)
            b = steady.newton_solve(self.pattern.sample_field(cfg.probe_grid),
                                    op0, self.nonlinearity,
                                    tol=cfg.tol("newton_tol"))
            if cfg.probe_epsilon != 0.0:
                st = steady.continuation(b, self.nonlinearity, cfg.probe_epsilon,
                                         tol=cfg.tol("newton_tol")).final
                op = assemble_laplacian(st.params, cfg.probe_grid)
            else:
                st, op = b, op0
            dt = dynamics.default_dt(self.nonlinearity, cfg.tol("imex_safety"))
            delta = cfg.tol("probe_delta_rel") * float(np.max(np.abs(st.field)))
            traces = {}
            for seed in cfg.probe_seeds:
                traces[seed] = dynamics.stability_probe(
                    st, op, self.nonlinearity, delta=delta,
                    horizon=cfg.probe_horizon, dt=dt, seed=seed)
            return {"state": st, "dt": dt, "delta": delta, "traces": traces}
        return self._timed("probe", run)

    # claims --------------------------------------------------------------------

    def claim_operator_consistency(self):
        cfg = self.config
        errors, orders = operator_consistency_orders(cfg.params)
        lo, hi = cfg.tol("operator_order_low"), cfg.tol("operator_order_high")
        passed = all(lo <= o <= hi for o in orders)
        return passed, {"errors": errors, "orders": orders}

    def claim_construction_exactness(self):
        cfg = self.config
        prof, nl = self.profile, self.nonlinearity
        params = cfg.params
        r, R = params.r, params.R
        # residual off the construction knots: probe at midpoints too
        phi = np.linspace(0.0, np.pi, 3 * cfg.profile.samples)[1:-1]
        pat = self.pattern
        c = np.sin(phi) / (r * (R + r * np.cos(phi)))
        res = pat.deriv2(phi) / r ** 2 - c * pat.deriv(phi) + nl(pat.value(phi))
        res_max = float(np.max(np.abs(res)))
        f_lo = float(nl(0.0))
        f_hi = float(nl(prof.height))
        from scipy.integrate import simpson
        p = R + r * np.cos(prof.phi)
        integral = float(simpson(p * nl(prof.u), x=prof.phi))
        passed = (res_max < cfg.tol("construction_residual_tol")
                  and f_lo < 0.0 < f_hi
                  and abs(integral) < cfg.tol("integral_tol"))
        return passed, {"ode_residual": res_max, "f_at_min": f_lo,
                        "f_at_max": f_hi, "weighted_integral": integral}

    def claim_unperturbed_stability(self):
        cfg = self.config
        grid = PeriodicGrid(*STABILITY_GRID)
        state, op = self._solve_base(grid)
        sl = spectral.sl_reduction_eigpair(
            state.field[:, 0], self.nonlinearity,
            cfg.params.with_epsilon(0.0), n_points=grid.n_phi)
        spec = spectral.principal_eigpair(state, op, self.nonlinearity,
                                          tol=cfg.tol("eigen_tol"),
                                          lambda_est=sl.lambda1)
        rel = abs(spec.lambda1 - sl.lambda1) / abs(sl.lambda1)
        norm_defect = abs(spec.normalization - 1.0)
        positive = bool(np.min(spec.eigenfield) > 0.0)
        passed = (spec.lambda1 > 0.0
                  and spec.residual < cfg.tol("eigen_residual_tol")
                  and positive
                  and norm_defect < cfg.tol("normalization_tol")
                  and rel < cfg.tol("oned_twod_rel_tol"))
        half = spectral.half_torus_normalization_check(
            self.sl_result.eigenprofile, cfg.params.with_epsilon(0.0))
        return passed and half["passed"], {
            "lambda1_2d": spec.lambda1, "lambda1_1d": sl.lambda1,
            "relative_difference": rel, "eigen_residual": spec.residual,
            "eigenfield_positive": positive, "normalization_defect": norm_defect,
            "half_torus_unit_defect": half["scaled_unit_defect"],
            "grid": list(STABILITY_GRID),
        }

    def claim_newton_continuation(self):
        cfg = self.config
        states = self.branch_states()
        eps = [s.params.epsilon for s in states]
        diffs = [float(np.max(np.abs(s.field - self.base.field))) for s in states]
        order = float(np.polyfit(np.log(eps), np.log(diffs), 1)[0])
        sym_tol = cfg.tol("symmetry_factor") * cfg.tol("newton_tol")
        defects = [steady.symmetry_check(s)["max_defect"] for s in states]
        passed = (cfg.tol("order_fit_low") <= order <= cfg.tol("order_fit_high")
                  and all(d < sym_tol for d in defects))
        return passed, {"epsilon": eps, "sup_diff": diffs, "fitted_order": order,
                        "symmetry_defects": defects, "symmetry_tolerance": sym_tol}

    def claim_eigenvalue_convergence(self):
        cfg = self.config
        lam0 = self.spectrum_base.lambda1
        rows = []
        for e in sorted(cfg.epsilon_list):
            spec = self.spectrum_at(e)
            rows.append({"epsilon": e, "lambda1": spec.lambda1,
                         "gap": abs(spec.lambda1 - lam0)})
        ratios = [rows[k + 1]["gap"] / rows[k]["gap"]
                  for k in range(len(rows) - 1) if rows[k]["gap"] > 0.0]
        passed = bool(ratios) and all(r >= cfg.tol("gap_ratio_min") for r in ratios)
        return passed, {"lambda1_base": lam0, "rows": rows, "gap_ratios": ratios}

    def claim_perturbation_structure(self):
        v = self.perturbation_verdicts
        n_ok = self.config.params.n_waves >= self.threshold.n_min
        measured = dict(v["measured"])
        measured["n_waves"] = self.config.params.n_waves
        measured["threshold_n"] = self.threshold.n_min
        return bool(v["all_passed"] and n_ok), {"checks": v["checks"], **measured}

    def claim_first_order_accuracy(self):
        cfg = self.config
        cw = self.first_order_comparison
        lo, hi = cfg.tol("e_ratio_low"), cfg.tol("e_ratio_high")
        ratios_ok = bool(cw["halving_ratios"]) and all(
            lo <= r <= hi for r in cw["halving_ratios"])
        scale = float(np.max(np.abs(self.base.field)))
        cos_ok = all(
            row["cos_content"] <= max(1e-8 * scale, row["epsilon"] * scale)
            for row in cw["rows"] if row["E"] is not None)
        rows = [{k: row[k] for k in ("epsilon", "E", "cos_content")}
                for row in cw["rows"] if row["E"] is not None]
        return ratios_ok and cos_ok, {
            "rows": rows, "halving_ratios": cw["halving_ratios"],
            "fitted_order": cw["fitted_order"], "cos_content_ok": cos_ok}

    def _census_claim(self, eps: float):
        cfg = self.config
        n = cfg.params.n_waves
        try:
            report, verdict, state = self.census_at(eps)
        except (NoConvergence, SingularJacobian) as exc:
            return False, {
                "epsilon": eps,
                "error": type(exc).__name__,
                "detail": str(exc),
                "failing_epsilon": getattr(exc, "epsilon", None),
                "note": "no stationary pattern reachable at this amplitude",
            }
        fine = cfg.grid.refine()
        try:
            report2, verdict2, _ = self.census_at(eps, grid=fine)
            doubled = {"count": report2.count, "passed": verdict2["passed"],
                       "max_match_distance": report2.max_match_distance}
            count_invariant = report2.count == report.count
        except (NoConvergence, SingularJacobian) as exc:
            doubled = {"error": type(exc).__name__}
            count_invariant = False
        passed = bool(verdict["passed"] and count_invariant)
        kinds = {}
        for p in report.points:
            kinds[p.kind] = kinds.get(p.kind, 0) + 1
        return passed, {
            "epsilon": eps, "count": report.count, "expected_count": 4 * n,
            "kinds": kinds, "max_match_distance": report.max_match_distance,
            "off_margin": report.off_margin, "verdict": verdict,
            "doubled_grid": doubled, "count_invariant": count_invariant,
        }

    def claim_headline_census(self):
        return self._census_claim(self.config.headline_epsilon)

    def claim_feasible_census(self):
        return self._census_claim(self.config.census_epsilon)

    def claim_lyapunov_probe(self):
        cfg = self.config
        probe = self.probe_traces()
        delta = probe["delta"]
        rows, ok = [], True
        for seed, trace in probe["traces"].items():
            peak = float(np.max(trace.sup_distance))
            final = float(trace.sup_distance[-1])
            de_max = float(np.max(np.diff(trace.energy)))
            seed_ok = (peak <= 3.0 * delta and final < delta
                       and de_max <= cfg.tol("energy_increase_tol"))
            ok = ok and seed_ok
            rows.append({"seed": seed, "peak": peak, "final": final,
                         "max_energy_increase": de_max, "ok": seed_ok})
        return ok, {"delta": delta, "dt": probe["dt"],
                    "epsilon": cfg.probe_epsilon, "seeds": rows}

    def claim_determinism(self):
        first = self._construct_payload()
        second = self._construct_payload()
        return first == second, {"construct_payload_sha": _sha(first),
                                 "rebuilt_identical": first == second}

    def _construct_payload(self) -> str:
        prof = build_profile(self.config.profile, self.config.params)
        nl = forge_nonlinearity(prof, self.config.params)
        return prof.to_json() + nl.to_csv()

    CLAIMS = [
        ("operator_consistency", "claim_operator_consistency"),
        ("construction_exactness", "claim_construction_exactness"),
        ("theorem_2_2", "claim_unperturbed_stability"),
        ("newton_continuation", "claim_newton_continuation"),
        ("lemma_uni", "claim_eigenvalue_convergence"),
        ("c1_vanishes_and_structure", "claim_perturbation_structure"),
        ("first_order_accuracy", "claim_first_order_accuracy"),
        ("theorem_1_1_count", "claim_headline_census"),
        ("theorem_1_1_feasible_range", "claim_feasible_census"),
        ("lyapunov_probe", "claim_lyapunov_probe"),
        ("determinism", "claim_determinism"),
    ]

    def verification_report(self) -> dict:
        claims = []
        for name, method in self.CLAIMS:
            t0 = time.perf_counter()
            try:
                passed, measured = getattr(self, method)()
            except TorusPatternsError as exc:
                passed, measured = False, {"error": type(exc).__name__,
                                           "detail": str(exc)}
            self.timings[f"claim:{name}"] = time.perf_counter() - t0
            claims.append({"name": name, "passed": bool(passed),
                           "measured": _jsonable(measured)})
        report = {
            "format": "toruspatterns.verification",
            "version": 1,
            "config_digest": self.config.digest(),
            "config": self.config.to_dict(),
            "threshold_n": self.threshold.n_min,
            "claims": claims,
            "all_passed": all(c["passed"] for c in claims),
        }
        return report

    # artifact emission --------------------------------------------------------

    def cache_dir(self) -> Path:
        env = os.environ.get("TORUSPATTERNS_CACHE")
        base = Path(env) if env else Path(self.config.output_dir) / "cache"
        base.mkdir(parents=True, exist_ok=True)
        return base

    def write_construct(self, out: Path) -> list:
        out.mkdir(parents=True, exist_ok=True)
        prof, nl = self.profile, self.nonlinearity
        fieldio.write_text(out / "profile.json", prof.to_json() + "\n")
        fieldio.write_text(out / "nonlinearity.csv", nl.to_csv())
        fieldio.write_text(out / "nonlinearity.json", nl.to_json() + "\n")
        lines = ["phi,U,dU,d2U"]
        for row in zip(prof.phi, prof.u, prof.du, prof.d2u):
            lines.append(",".join(f"{v:.17g}" for v in row))
        fieldio.write_text(out / "profile_curve.csv", "\n".join(lines) + "\n")
        fieldio.write_json(out / "threshold.json", {
            "threshold_n": self.threshold.n_min,
            "continuous_bound": self.threshold.bound,
            "max_abs_fprime": nl.max_abs_fprime,
        })
        return ["profile.json", "nonlinearity.csv", "nonlinearity.json",
                "profile_curve.csv", "threshold.json"]

    def write_steady(self, out: Path, eps: float) -> list:
        out.mkdir(parents=True, exist_ok=True)
        state = self.state_at(eps)
        tag = f"{eps:g}"
        fieldio.write_field_binary(out / f"steady_{tag}.tpf", state.field,
                                   state.grid)
        fieldio.write_text(out / f"steady_{tag}.csv",
                           fieldio.field_to_csv(state.field, state.grid))
        fieldio.write_json(out / f"steady_{tag}.json", state.sidecar())
        return [f"steady_{tag}.tpf", f"steady_{tag}.csv", f"steady_{tag}.json"]

    def write_spectrum(self, out: Path, eps: float) -> list:
        out.mkdir(parents=True, exist_ok=True)
        spec = self.spectrum_at(eps)
        tag = f"{eps:g}"
        fieldio.write_field_binary(out / f"eigenfield_{tag}.tpf",
                                   spec.eigenfield, self.config.grid)
        fieldio.write_json(out / f"spectral_{tag}.json", spec.sidecar())
        return [f"eigenfield_{tag}.tpf", f"spectral_{tag}.json"]

    def write_evolve(self, out: Path) -> list:
        out.mkdir(parents=True, exist_ok=True)
        probe = self.probe_traces()
        written = []
        for seed, trace in probe["traces"].items():
            name = f"trace_seed{seed}.csv"
            fieldio.write_text(out / name, trace.to_csv())
            written.append(name)
        return written

    def write_perturb(self, out: Path) -> list:
        out.mkdir(parents=True, exist_ok=True)
        sol = self.perturbation_solution
        fieldio.write_text(out / "perturbation.csv", sol.to_csv())
        fieldio.write_json(out / "perturbation_verdicts.json",
                           _jsonable(self.perturbation_verdicts))
        return ["perturbation.csv", "perturbation_verdicts.json"]

    def write_census(self, out: Path, eps: float) -> list:
        out.mkdir(parents=True, exist_ok=True)
        report, verdict, _ = self.census_at(eps)
        doc = report.to_jsonable()
        doc["verdict"] = verdict
        tag = f"{eps:g}"
        fieldio.write_json(out / f"census_{tag}.json", _jsonable(doc))
        lines = ["phi,theta,kind,grad_norm"]
        for p in report.points:
            lines.append(f"{p.phi:.17g},{p.theta:.17g},{p.kind},{p.grad_norm:.17g}")
        fieldio.write_text(out / f"census_{tag}.csv", "\n".join(lines) + "\n")
        return [f"census_{tag}.json", f"census_{tag}.csv"]

    def write_verify(self, out: Path) -> list:
        out.mkdir(parents=True, exist_ok=True)
        report = self.verification_report()
        fieldio.write_json(out / "verification_report.json", report)
        fieldio.write_json(out / "verification_timings.json",
                           {"seconds": {k: round(v, 3)
                                        for k, v in sorted(self.timings.items())}})
        written = ["verification_report.json", "verification_timings.json"]
        rows = next(c for c in report["claims"]
                    if c["name"] == "lemma_uni")["measured"]
        if "rows" in rows:
            lines = ["epsilon,lambda1,gap"]
            for row in rows["rows"]:
                lines.append(f'{row["epsilon"]:.17g},{row["lambda1"]:.17g},'
                             f'{row["gap"]:.17g}')
            fieldio.write_text(out / "eigenvalue_vs_epsilon.csv",
                               "\n".join(lines) + "\n")
            written.append("eigenvalue_vs_epsilon.csv")
        fo = next(c for c in report["claims"]
                  if c["name"] == "first_order_accuracy")["measured"]
        if "rows" in fo:
            lines = ["epsilon,E,cos_content"]
            for row in fo["rows"]:
                lines.append(f'{row["epsilon"]:.17g},{row["E"]:.17g},'
                             f'{row["cos_content"]:.17g}')
            fieldio.write_text(out / "first_order_error.csv",
                               "\n".join(lines) + "\n")
            written.append("first_order_error.csv")
        written += self.write_construct(out)
        return written + [r for r in [self._maybe_census_csv(out)] if r]

    def _maybe_census_csv(self, out: Path):
        try:
            return self.write_census(out, self.config.census_epsilon)[1]
        except TorusPatternsError:
            return None


def _sha(text: str) -> str:
    import hashlib
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and (np.isnan(obj) or np.isinf(obj)):
        return repr(obj)
    return obj
