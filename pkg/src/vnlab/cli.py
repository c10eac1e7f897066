"""Command-line front end: configured runs, CSV/JSON artifacts, manifests.

Commands
--------
run-scenario   one of the canned demonstrations, by name
evolve-qm      quantum channel on a position-grid Gaussian: pointer record,
               occupation invariance, momentum-variance growth
evolve-cm      classical channel on a phase-space Gaussian: probe marginal,
               marginal invariance, momentum-variance growth
mc-compare     trajectory Monte Carlo against the density-picture solvers
table1-report  the four quantum/classical correspondence rows as executed
               checks

Every run writes ``manifest.json`` (config echo, version, seed, timestamps,
check results, output digests), ``checks.json`` and one CSV per array output.
Outputs are byte-stable under rerun with the same config; the manifest differs
only in its timestamps. Exit status is 0 exactly when every check passes.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .cm import (
    cm_diffusion_rhs,
    probe_marginal_Q,
    probe_mean_Q,
    reduced_state_post_cm,
)
from .errors import ConfigInvalid, VnLabError
from .grids import Grid1D
from .heisenberg import (
    flow_action,
    flow_position,
    histogram_l1_distance,
    periodic_histogram_l1_distance,
    sample_initial,
    to_action_ensemble,
)
from .observables import (
    CouplingParams,
    ProbeSpec,
    SpectralObservable,
    action_observable,
    position_observable,
)
from .qm import (
    auto_pointer_grid,
    decoherence_kernel,
    lindblad_evolve,
    lindblad_rhs,
    pointer_distribution,
    pointer_mean,
    position_disturbance_scale,
    reduced_state_post,
)
from .scenarios import (
    SCENARIOS,
    ScenarioCheck,
    number_basis_initial_state,
    scenario_gaussian_bessel,
    scenario_interference,
    scenario_number_basis,
    scenario_two_delta,
)
from .states import (
    DensityOperator,
    build_gaussian_phase_density,
    delta_width,
    density_from_wavefunction,
    gaussian_wavepacket,
    phase_density_from_values,
    to_angle_action,
)
from .wigner import WignerEvolutionSpec, evolved_wigner, wigner_transform

SCHEMA_VERSION = 1

COMMANDS = ("run-scenario", "evolve-qm", "evolve-cm", "mc-compare", "table1-report")

DEFAULT_PARAMETERS: dict[str, dict] = {
    "run-scenario": {"scenario": "two_delta", "sigma_P": 0.3},
    "evolve-qm": {
        "n_x": 256,
        "grid_halfwidth": 8.0,
        "sigma_x": 1.0,
        "center_x": 0.25,
        "sigma_Q": 0.2,
        "epsilon": 1.0,
        "sigma_P": 0.6,
        "hbar": 1.0,
    },
    "evolve-cm": {
        "n_q": 256,
        "n_p": 256,
        "grid_halfwidth_q": 8.0,
        "grid_halfwidth_p": 12.0,
        "sigma_q": 1.0,
        "sigma_p": 1.0,
        "center_q": 0.25,
        "sigma_Q": 0.2,
        "epsilon": 1.0,
        "sigma_P": 0.6,
    },
    "mc-compare": {
        "n_samples": 100000,
        "seed": 20240801,
        "bins": 24,
        "sigma_q": 1.0,
        "sigma_p": 1.0,
        "sigma_Q": 0.4,
        "epsilon": 1.0,
        "sigma_P": 0.6,
        "branch": "both",
    },
    "table1-report": {
        "n_x": 256,
        "grid_halfwidth": 8.0,
        "sigma_x": 1.0,
        "center": 0.25,
        "sigma_Q": 0.25,
        "epsilon": 2.0,
        "sigma_P": 0.3,
        "hbar": 1.0,
    },
}

DEFAULT_TOLERANCES: dict[str, dict[str, float]] = {
    "run-scenario": {},
    "evolve-qm": {
        "pointer_normalization": 1e-8,
        "pointer_mean": 1e-8,
        "distribution_invariance": 1e-10,
        "variance_growth": 1e-4,
    },
    "evolve-cm": {
        "mass": 1e-6,
        "probe_mean": 1e-8,
        "q_marginal_drift": 1e-8,
        "variance_growth": 1e-4,
    },
    "mc-compare": {"l1_coefficient": 5.0},
    "table1-report": {
        "row1_expectation": 1e-8,
        "row2_uncertainty_qm": 1e-8,
        "row2_uncertainty_cm": 1e-6,
        "row3_variance": 1e-4,
        "row4_qm_derivative": 1e-3,
        "row4_cm_order": 0.6,
    },
}


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def _require_positive(params: dict, names: tuple[str, ...]) -> None:
    for name in names:
        if name in params and not params[name] > 0:
            raise ConfigInvalid(f"parameter {name!r} must be strictly positive")


def normalize_config(command: str, raw: dict | None) -> dict:
    """Merge defaults, derive the coupling pair, validate every field."""
    if command not in COMMANDS:
        raise ConfigInvalid(f"unknown command {command!r}")
    raw = dict(raw or {})
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigInvalid(f"unsupported schema_version {raw.get('schema_version')!r}")
    if raw.get("command", command) != command:
        raise ConfigInvalid(f"config field 'command' ({raw['command']!r}) conflicts with {command!r}")
    params = dict(DEFAULT_PARAMETERS[command])
    user = dict(raw.get("parameters", {}))
    known = set(params) | {"tau", "sigma_P", "seed"}
    if command == "run-scenario":
        known |= {
            "q0", "q1", "n_q", "n_Q", "alpha_re", "alpha_im", "beta_re", "beta_im",
            "separation", "sigma_x", "n_x", "sigma_qbar", "sigma_pbar", "dim",
            "hbar", "xi_compare_max", "n_xi", "n_theta", "sigma_Q", "epsilon",
        }
    for key in user:
        if key not in known:
            raise ConfigInvalid(f"unknown parameter {key!r} for command {command!r}")
    params.update(user)
    # A user-supplied member of the (tau, sigma_P) pair displaces the default
    # of the other; the pair is re-derived below.
    user_tau = user.get("tau") is not None
    user_sp = user.get("sigma_P") is not None
    if user_tau and not user_sp:
        params["sigma_P"] = None
    elif user_sp and not user_tau:
        params["tau"] = None

    if command == "run-scenario" and params.get("scenario") not in SCENARIOS:
        raise ConfigInvalid(f"unknown scenario {params.get('scenario')!r}")
    needs_coupling = command != "run-scenario" or params.get("scenario") != "gaussian_bessel"
    if needs_coupling:
        has_tau = "tau" in params and params["tau"] is not None
        has_sp = "sigma_P" in params and params["sigma_P"] is not None
        _require_positive(params, ("epsilon",))
        eps = float(params.get("epsilon", 1.0))
        if has_tau and has_sp:
            # Accept an already-normalized config; reject inconsistent pairs.
            derived = 0.5 * (eps * params["sigma_P"]) ** 2
            if abs(params["tau"] - derived) > 1e-12 * max(1.0, abs(params["tau"])):
                raise ConfigInvalid("give exactly one of 'tau' or 'sigma_P', not both")
        elif not has_tau and not has_sp:
            raise ConfigInvalid("exactly one of 'tau' or 'sigma_P' must be given")
        elif has_tau:
            if params["tau"] < 0:
                raise ConfigInvalid("parameter 'tau' must be non-negative")
            params["tau"] = float(params["tau"])
            params["sigma_P"] = float(np.sqrt(2.0 * params["tau"]) / eps)
        else:
            if params["sigma_P"] < 0:
                raise ConfigInvalid("parameter 'sigma_P' must be non-negative")
            params["sigma_P"] = float(params["sigma_P"])
            params["tau"] = float(0.5 * (eps * params["sigma_P"]) ** 2)
    _require_positive(
        params,
        ("sigma_Q", "sigma_x", "sigma_q", "sigma_p", "sigma_qbar", "sigma_pbar", "hbar"),
    )
    for name in ("n_x", "n_q", "n_p", "n_Q", "n_samples", "bins", "dim", "n_xi", "n_theta"):
        if name in params and (int(params[name]) != params[name] or params[name] < 2):
            raise ConfigInvalid(f"parameter {name!r} must be an integer >= 2")
    if command == "mc-compare" and params.get("branch") not in ("position", "action", "both"):
        raise ConfigInvalid("parameter 'branch' must be position, action or both")
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "parameters": params,
        "tolerances": dict(raw.get("tolerances", {})),
    }


def resolve_tolerances(command: str, config: dict, overrides: dict[str, float]) -> dict:
    tol = dict(DEFAULT_TOLERANCES[command])
    for source in (config.get("tolerances", {}), overrides):
        for name, value in source.items():
            if name not in tol:
                raise ConfigInvalid(f"unknown tolerance {name!r} for command {command!r}")
            tol[name] = float(value)
    return tol


def _probe_coupling(params: dict) -> tuple[ProbeSpec, CouplingParams]:
    probe = ProbeSpec(sigma_Q=params["sigma_Q"], sigma_P=params["sigma_P"])
    coupling = CouplingParams(epsilon=params["epsilon"], tau=params["tau"])
    return probe, coupling


# ---------------------------------------------------------------------------
# Command implementations: each returns (checks, scalars, tables)
# ---------------------------------------------------------------------------

Table = tuple[str, list[str], list[np.ndarray]]


def _moment(grid: Grid1D, density: np.ndarray, power: int = 1, center: float = 0.0) -> float:
    return grid.integrate((grid.nodes - center) ** power * density)


def _variance(grid: Grid1D, density: np.ndarray) -> float:
    mass = grid.integrate(density)
    mean = _moment(grid, density) / mass
    return _moment(grid, density, power=2, center=mean) / mass


def run_evolve_qm(params: dict, tol: dict):
    probe, coupling = _probe_coupling(params)
    hbar = params["hbar"]
    xgrid = Grid1D(-params["grid_halfwidth"], params["grid_halfwidth"], int(params["n_x"]))
    psi = gaussian_wavepacket(xgrid, center=params["center_x"], sigma_x=params["sigma_x"], hbar=hbar)
    rho = density_from_wavefunction(psi, xgrid)
    obs = SpectralObservable.from_diagonal(xgrid.nodes)
    kernel = decoherence_kernel(obs, coupling, hbar=hbar)
    rho_post = reduced_state_post(rho, obs, kernel)

    Qgrid = auto_pointer_grid(obs, probe, coupling, n=1024)
    pointer = pointer_distribution(rho, obs, probe, coupling, Qgrid)
    pointer_mass = Qgrid.integrate(pointer)
    mean_ratio = _moment(Qgrid, pointer) / coupling.epsilon
    mean_expected = pointer_mean(rho, obs, coupling) / coupling.epsilon

    invariance = float(np.max(np.abs(np.diag(rho_post.matrix) - np.diag(rho.matrix))))

    s2 = (hbar / (2.0 * params["sigma_x"])) ** 2
    p_half = 8.0 * np.sqrt(s2 + 2.0 * coupling.tau)
    pgrid = Grid1D(-p_half, p_half, int(params["n_x"]))
    spec = WignerEvolutionSpec(A=lambda x: x, tau=coupling.tau)
    w_before = wigner_transform(rho, pgrid, hbar=hbar)
    w_after = evolved_wigner(rho, spec, pgrid, hbar=hbar)
    var_after = _variance(pgrid, w_after.p_marginal_density())

    checks = [
        ScenarioCheck("pointer distribution mass", pointer_mass, 1.0,
                      tol["pointer_normalization"], "oracle"),
        ScenarioCheck("mean pointer shift over epsilon equals <A>", mean_ratio,
                      mean_expected, tol["pointer_mean"], "analytic"),
        ScenarioCheck("outcome distribution invariance (max drift)", invariance, 0.0,
                      tol["distribution_invariance"], "analytic"),
        ScenarioCheck("momentum variance grows by 2*tau", var_after, s2 + 2.0 * coupling.tau,
                      tol["variance_growth"], "closed-form"),
    ]
    scalars = {
        "tau": coupling.tau,
        "disturbance_scale": position_disturbance_scale(rho, coupling, hbar=hbar),
        "momentum_variance_before": _variance(pgrid, w_before.p_marginal_density()),
        "momentum_variance_after": var_after,
    }
    tables: list[Table] = [
        ("pointer_distribution.csv",
         ["Q (probe position units)", "density (1/Q units)"],
         [Qgrid.nodes, pointer]),
        ("momentum_density.csv",
         ["p (momentum units)", "before (1/p units)", "after (1/p units)"],
         [pgrid.nodes, w_before.p_marginal_density(), w_after.p_marginal_density()]),
    ]
    return checks, scalars, tables


def run_evolve_cm(params: dict, tol: dict):
    probe, coupling = _probe_coupling(params)
    qgrid = Grid1D(-params["grid_halfwidth_q"], params["grid_halfwidth_q"], int(params["n_q"]))
    pgrid = Grid1D(-params["grid_halfwidth_p"], params["grid_halfwidth_p"], int(params["n_p"]))
    rho = build_gaussian_phase_density(
        qgrid, pgrid, params["sigma_q"], params["sigma_p"], center_q=params["center_q"]
    )
    obs = position_observable()
    rho_post = reduced_state_post_cm(rho, obs, coupling.tau)

    Qgrid = Grid1D(
        coupling.epsilon * qgrid.lo - 8 * probe.sigma_Q,
        coupling.epsilon * qgrid.hi + 8 * probe.sigma_Q,
        1024,
    )
    marginal = probe_marginal_Q(rho, probe, obs, coupling, Qgrid)
    mean_ratio = _moment(Qgrid, marginal) / coupling.epsilon
    mean_expected = probe_mean_Q(rho, obs, coupling) / coupling.epsilon

    drift = float(np.max(np.abs(rho_post.q_marginal() - rho.q_marginal())))
    var_after = _variance(pgrid, rho_post.p_marginal())

    checks = [
        ScenarioCheck("evolved density mass", rho_post.mass(), 1.0, tol["mass"], "oracle"),
        ScenarioCheck("mean probe shift over epsilon equals <A>", mean_ratio,
                      mean_expected, tol["probe_mean"], "analytic"),
        ScenarioCheck("q-marginal invariance (max drift)", drift, 0.0,
                      tol["q_marginal_drift"], "analytic"),
        ScenarioCheck("momentum variance grows by 2*tau", var_after,
                      params["sigma_p"] ** 2 + 2.0 * coupling.tau,
                      tol["variance_growth"], "closed-form"),
    ]
    scalars = {
        "tau": coupling.tau,
        "momentum_variance_before": _variance(pgrid, rho.p_marginal()),
        "momentum_variance_after": var_after,
    }
    tables: list[Table] = [
        ("probe_marginal.csv",
         ["Q (probe position units)", "density (1/Q units)"],
         [Qgrid.nodes, marginal]),
        ("q_marginal.csv",
         ["q (position units)", "before (1/q units)", "after (1/q units)"],
         [qgrid.nodes, rho.q_marginal(), rho_post.q_marginal()]),
        ("p_marginal.csv",
         ["p (momentum units)", "before (1/p units)", "after (1/p units)"],
         [pgrid.nodes, rho.p_marginal(), rho_post.p_marginal()]),
    ]
    return checks, scalars, tables


def run_mc_compare(params: dict, tol: dict):
    probe, coupling = _probe_coupling(params)
    n = int(params["n_samples"])
    bins = int(params["bins"])
    seed = int(params["seed"])
    budget = tol["l1_coefficient"] / np.sqrt(n)
    checks: list[ScenarioCheck] = []
    scalars: dict = {"l1_budget": budget, "seed": seed}
    tables: list[Table] = []

    if params["branch"] in ("position", "both"):
        qgrid = Grid1D(-8.0, 8.0, 256)
        pgrid = Grid1D(-12.0, 12.0, 256)
        rho = build_gaussian_phase_density(qgrid, pgrid, params["sigma_q"], params["sigma_p"])
        obs = position_observable()
        ens0 = sample_initial(rho, probe, n, seed)
        ens1 = flow_position(ens0, coupling)

        Qgrid = Grid1D(-10.0, 10.0, 1024)
        model_Q = probe_marginal_Q(rho, probe, obs, coupling, Qgrid)
        l1_Q = histogram_l1_distance(ens1.Q, Qgrid, model_Q, bins=bins)
        diffused = reduced_state_post_cm(rho, obs, coupling.tau)
        l1_p = histogram_l1_distance(ens1.p, pgrid, diffused.p_marginal(), bins=bins)
        conserved = float(np.max(np.abs(ens1.q - ens0.q)) + np.max(np.abs(ens1.P - ens0.P)))
        checks += [
            ScenarioCheck("position branch: pointer histogram vs density (L1)",
                          l1_Q, 0.0, budget, "oracle"),
            ScenarioCheck("position branch: momentum histogram vs diffused density (L1)",
                          l1_p, 0.0, budget, "oracle"),
            ScenarioCheck("position branch: q and P conserved bitwise",
                          conserved, 0.0, 0.0, "analytic"),
        ]
        edges = np.linspace(Qgrid.lo, Qgrid.hi, bins + 1)
        counts, _ = np.histogram(ens1.Q, bins=edges)
        tables.append(
            ("mc_position_pointer_histogram.csv",
             ["Q_bin_left (probe position units)", "count"],
             [edges[:-1], counts.astype(float)])
        )

    if params["branch"] in ("action", "both"):
        half = 8.0 * max(params["sigma_q"], params["sigma_p"])
        grid = Grid1D(-half, half, 384)
        rho = build_gaussian_phase_density(grid, grid, params["sigma_q"], params["sigma_p"])
        obs = action_observable(lambda xi: xi, lambda xi: np.ones_like(xi))
        ens0 = to_action_ensemble(sample_initial(rho, probe, n, seed + 1))
        ens1 = flow_action(ens0, obs, coupling)

        aa = to_angle_action(rho, n_xi=256, n_theta=256)
        solved = reduced_state_post_cm(aa, obs, coupling.tau)
        theta_density = solved.theta_marginal()
        l1_theta = periodic_histogram_l1_distance(
            ens1.theta, solved.thetagrid.nodes, theta_density, bins=bins
        )
        conserved = float(np.max(np.abs(ens1.xi - ens0.xi)) + np.max(np.abs(ens1.P - ens0.P)))
        mean_Q = float(np.mean(ens1.Q)) / coupling.epsilon
        expect_A = float(
            aa.xigrid.weights @ (aa.xigrid.nodes * aa.xi_marginal())
        )
        mc_sigma = float(np.std(ens1.Q) / coupling.epsilon / np.sqrt(n))
        checks += [
            ScenarioCheck("action branch: angle histogram vs spectral solution (L1)",
                          l1_theta, 0.0, budget, "oracle"),
            ScenarioCheck("action branch: xi and P conserved bitwise",
                          conserved, 0.0, 0.0, "analytic"),
            ScenarioCheck("action branch: mean pointer shift over epsilon vs <A> (3 sigma)",
                          mean_Q, expect_A, 3.0 * mc_sigma, "oracle"),
        ]
        scalars["action_mean_pointer_over_epsilon"] = mean_Q
        scalars["action_expected_A"] = expect_A
    return checks, scalars, tables


def run_table1_report(params: dict, tol: dict):
    probe, coupling = _probe_coupling(params)
    hbar = params["hbar"]
    eps = coupling.epsilon
    tau = coupling.tau
    n = int(params["n_x"])
    half = params["grid_halfwidth"]
    xgrid = Grid1D(-half, half, n)
    rows = []

    # Row 1: mean pointer shift over epsilon equals <A> on both sides.
    psi = gaussian_wavepacket(xgrid, center=params["center"], sigma_x=params["sigma_x"], hbar=hbar)
    rho_qm = density_from_wavefunction(psi, xgrid)
    obs_qm = SpectralObservable.from_diagonal(xgrid.nodes)
    Qgrid = auto_pointer_grid(obs_qm, probe, coupling, n=2048)
    pointer = pointer_distribution(rho_qm, obs_qm, probe, coupling, Qgrid)
    qm_row1 = _moment(Qgrid, pointer) / eps
    expect_row1 = pointer_mean(rho_qm, obs_qm, coupling) / eps

    pgrid = Grid1D(-12.0, 12.0, n)
    rho_cm = build_gaussian_phase_density(
        xgrid, pgrid, params["sigma_x"], 1.0, center_q=params["center"]
    )
    obs_cm = position_observable()
    marg = probe_marginal_Q(rho_cm, probe, obs_cm, coupling, Qgrid)
    cm_row1 = _moment(Qgrid, marg) / eps
    checks = [
        ScenarioCheck("row 1 (QM): <Q>'/epsilon equals <A>", qm_row1, expect_row1,
                      tol["row1_expectation"], "analytic"),
        ScenarioCheck("row 1 (CM): <Q>'/epsilon equals <A>", cm_row1, expect_row1,
                      tol["row1_expectation"], "analytic"),
    ]
    rows.append({
        "row": 1,
        "description": "expectation values: <Q>'/epsilon = <A>",
        "qm_measured": qm_row1,
        "cm_measured": cm_row1,
        "expected": expect_row1,
        "tolerance": tol["row1_expectation"],
        "qm_passed": checks[-2].passed,
        "cm_passed": checks[-1].passed,
    })

    # Row 2: pointer resolution scale sigma_Q / epsilon on both sides.
    two_level = SpectralObservable.from_diagonal(np.array([0.0, 1.0]))
    rho2 = DensityOperator(np.diag([1.0, 0.0]).astype(complex))
    Q2 = Grid1D(-8 * probe.sigma_Q, 8 * probe.sigma_Q, 2048)
    p2 = pointer_distribution(rho2, two_level, probe, coupling, Q2)
    qm_row2 = float(np.sqrt(_variance(Q2, p2))) / eps

    w = delta_width(xgrid)
    bump = np.exp(-0.5 * ((xgrid.nodes - 0.0) / w) ** 2)
    rho_delta = phase_density_from_values(
        xgrid, pgrid, np.outer(bump, np.exp(-0.5 * pgrid.nodes**2))
    )
    Q3 = Grid1D(-8 * (probe.sigma_Q + eps * w), 8 * (probe.sigma_Q + eps * w), 2048)
    p3 = probe_marginal_Q(rho_delta, probe, obs_cm, coupling, Q3)
    sigma_eff = np.sqrt(_variance(Q3, p3))
    cm_row2 = float(np.sqrt(max(sigma_eff**2 - (eps * w) ** 2, 0.0))) / eps
    expect_row2 = probe.sigma_Q / eps
    checks += [
        ScenarioCheck("row 2 (QM): pointer width over epsilon", qm_row2, expect_row2,
                      tol["row2_uncertainty_qm"], "analytic"),
        ScenarioCheck("row 2 (CM): deconvolved pointer width over epsilon", cm_row2,
                      expect_row2, tol["row2_uncertainty_cm"], "analytic"),
    ]
    rows.append({
        "row": 2,
        "description": "uncertainty: pointer resolution scale sigma_Q/epsilon",
        "qm_measured": qm_row2,
        "cm_measured": cm_row2,
        "expected": expect_row2,
        "tolerance": max(tol["row2_uncertainty_qm"], tol["row2_uncertainty_cm"]),
        "qm_passed": checks[-2].passed,
        "cm_passed": checks[-1].passed,
    })

    # Row 3: both final reduced states grow the momentum variance by 2*tau.
    s2 = (hbar / (2.0 * params["sigma_x"])) ** 2
    p_half = 8.0 * np.sqrt(s2 + 2.0 * tau) + 1.0
    wgrid = Grid1D(-p_half, p_half, n)
    w_after = evolved_wigner(rho_qm, WignerEvolutionSpec(A=lambda x: x, tau=tau), wgrid, hbar=hbar)
    qm_row3 = _variance(wgrid, w_after.p_marginal_density())

    rho_cm3 = build_gaussian_phase_density(xgrid, wgrid, params["sigma_x"], np.sqrt(s2))
    cm_post = reduced_state_post_cm(rho_cm3, obs_cm, tau)
    cm_row3 = _variance(wgrid, cm_post.p_marginal())
    expect_row3 = s2 + 2.0 * tau
    checks += [
        ScenarioCheck("row 3 (QM): evolved Wigner momentum variance", qm_row3, expect_row3,
                      tol["row3_variance"], "closed-form"),
        ScenarioCheck("row 3 (CM): diffused density momentum variance", cm_row3, expect_row3,
                      tol["row3_variance"], "closed-form"),
    ]
    rows.append({
        "row": 3,
        "description": "final reduced state: momentum variance s^2 + 2*tau",
        "qm_measured": qm_row3,
        "cm_measured": cm_row3,
        "expected": expect_row3,
        "tolerance": tol["row3_variance"],
        "qm_passed": checks[-2].passed,
        "cm_passed": checks[-1].passed,
    })

    # Row 4: generator consistency, finite differences against the rhs.
    dim = 48  # tail weight ~e^-34 at these widths
    rho_nb = number_basis_initial_state(1.0, 1.4, dim, hbar=hbar)
    a_matrix = np.diag(hbar * (np.arange(dim) + 0.5))
    tau0, dtau = 0.2, 1e-4
    mid = lindblad_evolve(rho_nb, a_matrix, tau0, hbar=hbar)
    plus = lindblad_evolve(rho_nb, a_matrix, tau0 + dtau, hbar=hbar)
    minus = lindblad_evolve(rho_nb, a_matrix, tau0 - dtau, hbar=hbar)
    fd = (plus.matrix - minus.matrix) / (2.0 * dtau)
    rhs = lindblad_rhs(mid, a_matrix, hbar=hbar)
    qm_row4 = float(np.max(np.abs(fd - rhs)) / np.max(np.abs(rhs)))

    def cm_residual(n_pts: int) -> float:
        g_q = Grid1D(-half, half, n_pts)
        g_p = Grid1D(-12.0, 12.0, n_pts)
        rho0 = build_gaussian_phase_density(g_q, g_p, 1.0, 2.0)
        tau_c, dtau_c = 0.25, 1e-3
        r_mid = reduced_state_post_cm(rho0, obs_cm, tau_c)
        r_plus = reduced_state_post_cm(rho0, obs_cm, tau_c + dtau_c)
        r_minus = reduced_state_post_cm(rho0, obs_cm, tau_c - dtau_c)
        fd_c = (r_plus.values - r_minus.values) / (2.0 * dtau_c)
        rhs_c = cm_diffusion_rhs(r_mid, obs_cm)
        return float(np.max(np.abs(fd_c - rhs_c)))

    coarse, fine = cm_residual(193), cm_residual(385)
    cm_row4 = float(np.log2(coarse / fine))
    checks += [
        ScenarioCheck("row 4 (QM): Lindblad derivative check (relative error)",
                      qm_row4, 0.0, tol["row4_qm_derivative"], "oracle"),
        ScenarioCheck("row 4 (CM): double-bracket convergence order under halving",
                      cm_row4, 2.0, tol["row4_cm_order"], "oracle"),
    ]
    rows.append({
        "row": 4,
        "description": "diffusion equation: generator consistency",
        "qm_measured": qm_row4,
        "cm_measured": cm_row4,
        "expected_qm": 0.0,
        "expected_cm": 2.0,
        "tolerance_qm": tol["row4_qm_derivative"],
        "tolerance_cm": tol["row4_cm_order"],
        "qm_passed": checks[-2].passed,
        "cm_passed": checks[-1].passed,
    })

    scalars = {"rows": rows, "epsilon": eps, "tau": tau}
    tables: list[Table] = [
        ("table1_row1_pointer.csv",
         ["Q (probe position units)", "qm_density (1/Q units)", "cm_density (1/Q units)"],
         [Qgrid.nodes, pointer, marg]),
    ]
    return checks, scalars, tables


def run_scenario_command(params: dict, tol: dict):
    name = params["scenario"]
    probewidth = params.get("sigma_Q", 0.05 if name == "two_delta" else 0.1)
    if name in ("two_delta", "interference"):
        probe = ProbeSpec(sigma_Q=probewidth, sigma_P=params["sigma_P"])
        coupling = CouplingParams(epsilon=params.get("epsilon", 1.0), tau=params["tau"])
    if name == "two_delta":
        result = scenario_two_delta(
            q0=params.get("q0", 0.0),
            q1=params.get("q1", 1.0),
            probe=probe,
            coupling=coupling,
            n_q=int(params.get("n_q", 1024)),
            n_Q=int(params.get("n_Q", 2048)),
        )
        tables = [("probe_marginal.csv",
                   ["Q (probe position units)", "density (1/Q units)"],
                   [result.outputs["Q"], result.outputs["probe_marginal"]])]
    elif name == "interference":
        alpha = complex(params.get("alpha_re", 1 / np.sqrt(2)), params.get("alpha_im", 0.0))
        beta = complex(params.get("beta_re", 1 / np.sqrt(2)), params.get("beta_im", 0.0))
        result = scenario_interference(
            alpha=alpha,
            beta=beta,
            separation=params.get("separation", 2.0),
            probe=probe,
            coupling=coupling,
            sigma_x=params.get("sigma_x", 1.0),
            n_x=int(params.get("n_x", 1024)),
            n_Q=int(params.get("n_Q", 1024)),
        )
        tables = [
            ("position_density.csv",
             ["x (position units)", "superposition (1/x units)", "mixture (1/x units)"],
             [result.outputs["x"], result.outputs["position_density_superposition"],
              result.outputs["position_density_mixture"]]),
            ("pointer.csv",
             ["Q (probe position units)", "superposition (1/Q units)", "mixture (1/Q units)"],
             [result.outputs["Q"], result.outputs["pointer_superposition"],
              result.outputs["pointer_mixture"]]),
        ]
    elif name == "number_basis":
        result = scenario_number_basis(
            sigma_qbar=params.get("sigma_qbar", 1.0),
            sigma_pbar=params.get("sigma_pbar", 1.0),
            dim=int(params.get("dim", 64)),
            coupling=CouplingParams(epsilon=params.get("epsilon", 1.0), tau=params["tau"]),
            hbar=params.get("hbar", 1.0),
        )
        tables = [("occupation.csv",
                   ["level (action units)", "probability"],
                   [result.outputs["levels"], result.outputs["occupation"]])]
    else:
        result = scenario_gaussian_bessel(
            sigma_qbar=params.get("sigma_qbar", 1.0),
            sigma_pbar=params.get("sigma_pbar", 2.0),
            xi_compare_max=params.get("xi_compare_max", 10.0),
            n_xi=int(params.get("n_xi", 481)),
            n_theta=int(params.get("n_theta", 512)),
        )
        tables = [("angle_average.csv",
                   ["xi (action units)", "numeric (1/xi units)", "closed_form (1/xi units)"],
                   [result.outputs["xi"], result.outputs["numeric_average"],
                    result.outputs["closed_form"]])]
    scalars = {
        k: v for k, v in result.outputs.items() if np.isscalar(v) or isinstance(v, (bool, int, float))
    }
    scalars["scenario"] = result.name
    return list(result.checks), scalars, tables


def table1_report(config: dict | None = None, tolerance_overrides: dict | None = None) -> dict:
    """Run the four correspondence rows and return {rows, checks, all_passed}.

    In-memory variant of the ``table1-report`` command (no files written).
    """
    cfg = normalize_config("table1-report", config)
    tol = resolve_tolerances("table1-report", cfg, tolerance_overrides or {})
    checks, scalars, _tables = run_table1_report(cfg["parameters"], tol)
    return {
        "rows": scalars["rows"],
        "checks": [c.as_dict() for c in checks],
        "all_passed": all(c.passed for c in checks),
    }


RUNNERS = {
    "run-scenario": run_scenario_command,
    "evolve-qm": run_evolve_qm,
    "evolve-cm": run_evolve_cm,
    "mc-compare": run_mc_compare,
    "table1-report": run_table1_report,
}


# ---------------------------------------------------------------------------
# Artifact writing
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_table(path: Path, headers: list[str], columns: list[np.ndarray]) -> None:
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise VnLabError("table columns must share a length")
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(headers) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(
    config: dict,
    out_dir: Path,
    seed: int | None = None,
    tolerance_overrides: dict[str, float] | None = None,
) -> dict:
    """Run one configured job, write its artifacts, return the manifest."""
    command = config["command"]
    config = normalize_config(command, config)
    if seed is not None:
        config["parameters"]["seed"] = int(seed)
    tol = resolve_tolerances(command, config, tolerance_overrides or {})
    config["tolerances"] = tol

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = dt.datetime.now(dt.timezone.utc).isoformat()

    checks, scalars, tables = RUNNERS[command](config["parameters"], tol)

    for filename, headers, columns in tables:
        write_table(out_dir / filename, headers, columns)
    checks_doc = {
        "command": command,
        "all_passed": all(c.passed for c in checks),
        "checks": [_jsonable(c.as_dict()) for c in checks],
        "scalars": _jsonable(scalars),
    }
    checks_path = out_dir / "checks.json"
    checks_path.write_text(json.dumps(checks_doc, indent=2, sort_keys=True) + "\n")

    outputs = {t[0]: _sha256(out_dir / t[0]) for t in tables}
    outputs["checks.json"] = _sha256(checks_path)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _jsonable(config),
        "artifact_version": __version__,
        "seed": config["parameters"].get("seed"),
        "started_utc": started,
        "finished_utc": dt.datetime.now(dt.timezone.utc).isoformat(),
        "all_passed": checks_doc["all_passed"],
        "checks": checks_doc["checks"],
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parse_tolerance(entry: str) -> tuple[str, float]:
    if "=" not in entry:
        raise ConfigInvalid(f"tolerance override {entry!r} is not name=value")
    name, value = entry.split("=", 1)
    try:
        return name.strip(), float(value)
    except ValueError as exc:
        raise ConfigInvalid(f"tolerance override {entry!r} has a non-numeric value") from exc


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vnlab",
        description="Quantum and classical probe-measurement models, side by side.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--out", type=Path, default=Path("vnlab-out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument(
        "--tolerance", action="append", default=[], metavar="NAME=VALUE",
        help="tolerance override (repeatable)",
    )
    args = parser.parse_args(argv)

    try:
        raw = {}
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigInvalid(f"cannot read config file {args.config}: {exc}") from exc
        overrides = dict(_parse_tolerance(t) for t in args.tolerance)
        config = normalize_config(args.command, raw)
        manifest = execute(config, args.out, seed=args.seed, tolerance_overrides=overrides)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}")
        return 2
    except VnLabError as exc:
        print(f"run failed: {exc}")
        return 1

    for check in manifest["checks"]:
        flag = "PASS" if check["passed"] else "FAIL"
        print(f"[{flag}] {check['description']}: {check['measured']:.6g} "
              f"(expected {check['expected']:.6g} +- {check['tolerance']:.2g})")
    if not manifest["all_passed"]:
        failing = [c["description"] for c in manifest["checks"] if not c["passed"]]
        print(f"tolerance exceeded: {', '.join(failing)}")
        return 1
    print(f"all {len(manifest['checks'])} checks passed; artifacts in {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
