"""Trajectory-picture Monte Carlo: exact flow maps over sampled ensembles.

Instead of evolving densities, sample the initial product distribution and
push each (q0, p0, Q0, P0) quadruple through the exact final-time maps of the
impulsive coupling. For A = q: q and P are conserved, p' = p0 - eps*P0,
Q' = Q0 + eps*q0. For A(xi): xi and P are conserved, the angle advances by
-eps*(dA/dxi)*P0, and Q' = Q0 + eps*A(xi0). Histograms of the evolved samples
validate the density-picture solvers statistically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvariantViolation
from .grids import TWO_PI, Grid1D, UnitsConfig
from .observables import ClassicalObservable, CouplingParams, ProbeSpec
from .states import PhaseSpaceDensity

_SAMPLE_CHUNK = 8192


# ---------------------------------------------------------------------------
# Coupling pulse
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingProfile:
    """Smooth unit-mass pulse g(t) with compact support around t1.

    G(t) is the running integral, rising monotonically from 0 to 1; the final
    state of every flow map corresponds to G = 1.
    """

    t1: float
    width: float
    resolution: int = 4001

    def __post_init__(self):
        if not self.width > 0:
            raise InvariantViolation("pulse width must be positive")

    @cached_property
    def _tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.linspace(self.t1 - self.width, self.t1 + self.width, self.resolution)
        u = (t - self.t1) / self.width
        with np.errstate(divide="ignore", over="ignore"):
            raw = np.where(np.abs(u) < 1.0, np.exp(-1.0 / np.maximum(1.0 - u * u, 1e-300)), 0.0)
        h = t[1] - t[0]
        cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (raw[1:] + raw[:-1]) * h)])
        g = raw / cumulative[-1]
        G = cumulative / cumulative[-1]
        return t, g, G

    def g(self, t) -> np.ndarray:
        tt, g, _ = self._tables
        return np.interp(np.asarray(t, dtype=float), tt, g, left=0.0, right=0.0)

    def G(self, t) -> np.ndarray:
        tt, _, G = self._tables
        return np.interp(np.asarray(t, dtype=float), tt, G, left=0.0, right=1.0)

    def validate(self, tol: float = 1e-10) -> None:
        tt, g, G = self._tables
        h = tt[1] - tt[0]
        total = float(np.sum(0.5 * (g[1:] + g[:-1]) * h))
        if abs(total - 1.0) > tol:
            raise InvariantViolation(f"pulse integral {total!r} deviates from 1")
        if np.any(np.diff(G) < -1e-15) or abs(G[0]) > tol or abs(G[-1] - 1.0) > tol:
            raise InvariantViolation("running integral must rise monotonically 0 -> 1")


def bump_profile(t1: float = 1.0, width: float = 0.5) -> CouplingProfile:
    return CouplingProfile(t1=t1, width=width)


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Sampled (q, p, Q, P) quadruples with their master seed."""

    q: np.ndarray
    p: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    seed: int

    def __post_init__(self):
        n = self.q.size
        for name in ("p", "Q", "P"):
            if getattr(self, name).size != n:
                raise InvariantViolation("ensemble component lengths differ")

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class ActionEnsemble:
    """The same ensemble expressed in (xi, theta) for the system pair."""

    xi: np.ndarray
    theta: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.xi.size


def _inverse_cdf_rows(cdf_rows: np.ndarray, nodes: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Invert one monotone CDF per row at one target per row (vectorized)."""
    totals = cdf_rows[:, -1]
    targets = u * totals
    idx = np.minimum(
        np.sum(cdf_rows < targets[:, None], axis=1), cdf_rows.shape[1] - 1
    )
    idx = np.maximum(idx, 1)
    c_lo = np.take_along_axis(cdf_rows, (idx - 1)[:, None], axis=1)[:, 0]
    c_hi = np.take_along_axis(cdf_rows, idx[:, None], axis=1)[:, 0]
    span = np.maximum(c_hi - c_lo, 1e-300)
    frac = np.clip((targets - c_lo) / span, 0.0, 1.0)
    h = nodes[1] - nodes[0]
    return nodes[idx - 1] + frac * h


def sample_initial(
    rho_s: PhaseSpaceDensity, probe: ProbeSpec, n: int, seed: int
) -> TrajectoryEnsemble:
    """Draw n quadruples from rho_s(q, p) * rho_pi(Q, P), deterministically.

    System pairs come from inverse-CDF sampling: q from the q-marginal, then p
    from the row-interpolated conditional. Probe pairs are the independent
    Gaussians; sigma_P = 0 yields exactly zero momenta. The counter-based
    Philox stream makes the draw schedule-independent for a given seed.
    """
    if n < 1:
        raise InvariantViolation("need at least one sample")
    rng = np.random.Generator(np.random.Philox(key=seed))
    u_q = rng.random(n)
    u_p = rng.random(n)
    z_Q = rng.standard_normal(n)
    z_P = rng.standard_normal(n)

    qnodes = rho_s.qgrid.nodes
    pnodes = rho_s.pgrid.nodes
    h_q, h_p = rho_s.qgrid.h, rho_s.pgrid.h

    marg = rho_s.q_marginal()
    cdf_q = np.concatenate([[0.0], np.cumsum(0.5 * (marg[1:] + marg[:-1]) * h_q)])
    targets = u_q * cdf_q[-1]
    idx = np.clip(np.searchsorted(cdf_q, targets), 1, cdf_q.size - 1)
    span = np.maximum(cdf_q[idx] - cdf_q[idx - 1], 1e-300)
    frac = np.clip((targets - cdf_q[idx - 1]) / span, 0.0, 1.0)
    q = qnodes[idx - 1] + frac * h_q

    # Conditional p draw: blend the two bracketing row CDFs linearly in q.
    row_cdf = np.concatenate(
        [np.zeros((rho_s.qgrid.n, 1)), np.cumsum(0.5 * (rho_s.values[:, 1:] + rho_s.values[:, :-1]) * h_p, axis=1)],
        axis=1,
    )
    pos = np.clip((q - qnodes[0]) / h_q, 0.0, rho_s.qgrid.n - 1 - 1e-12)
    left = pos.astype(int)
    w = pos - left
    p = np.empty(n)
    for start in range(0, n, _SAMPLE_CHUNK):
        sl = slice(start, min(start + _SAMPLE_CHUNK, n))
        blend = (1.0 - w[sl, None]) * row_cdf[left[sl]] + w[sl, None] * row_cdf[left[sl] + 1]
        p[sl] = _inverse_cdf_rows(blend, pnodes, u_p[sl])

    Q = probe.sigma_Q * z_Q
    P = probe.sigma_P * z_P
    return TrajectoryEnsemble(q=q, p=p, Q=Q, P=P, seed=seed)


# ---------------------------------------------------------------------------
# Flow maps (final time, G = 1)
# ---------------------------------------------------------------------------

def flow_position(ens: TrajectoryEnsemble, coupling: CouplingParams) -> TrajectoryEnsemble:
    """q' = q0, P' = P0 (conserved, untouched arrays); p' = p0 - eps*P0, Q' = Q0 + eps*q0."""
    eps = coupling.epsilon
    return TrajectoryEnsemble(
        q=ens.q,
        p=ens.p - eps * ens.P,
        Q=ens.Q + eps * ens.q,
        P=ens.P,
        seed=ens.seed,
    )


def to_action_ensemble(
    ens: TrajectoryEnsemble, units: UnitsConfig = UnitsConfig()
) -> ActionEnsemble:
    """Canonical transform of the rescaled pair: xi = (qbar^2 + pbar^2)/2.

    The equal-unit rescaling qbar = C q, pbar = p / C is applied to system and
    probe pairs alike before the polar transform.
    """
    c = units.scale_C
    qbar, pbar = c * ens.q, ens.p / c
    xi = 0.5 * (qbar**2 + pbar**2)
    theta = np.mod(np.arctan2(pbar, qbar), TWO_PI)
    return ActionEnsemble(xi=xi, theta=theta, Q=c * ens.Q, P=ens.P / c, seed=ens.seed)


def flow_action(
    ens,
    obs: ClassicalObservable,
    coupling: CouplingParams,
    units: UnitsConfig = UnitsConfig(),
) -> ActionEnsemble:
    """xi' = xi0, P' = P0; theta' = theta0 - eps*(dA/dxi)|_xi0 * P0 mod 2pi; Q' = Q0 + eps*A(xi0).

    Accepts a Cartesian ensemble (rescaled and transformed first) or an
    ActionEnsemble already in equal-unit coordinates.
    """
    if isinstance(ens, TrajectoryEnsemble):
        ens = to_action_ensemble(ens, units)
    if obs.dA_dxi is None or obs.A_of_xi is None:
        raise InvariantViolation("action flow needs A(xi) and dA/dxi")
    eps = coupling.epsilon
    theta = np.mod(ens.theta - eps * obs.dA_dxi(ens.xi) * ens.P, TWO_PI)
    return ActionEnsemble(
        xi=ens.xi,
        theta=theta,
        Q=ens.Q + eps * obs.A_of_xi(ens.xi),
        P=ens.P,
        seed=ens.seed,
    )


# ---------------------------------------------------------------------------
# Uncertainty-disturbance product and histogram comparisons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UncertaintyDisturbance:
    """(sigma_Q/eps) * (eps*sigma_P) = sigma_Q*sigma_P; a scaling, not a bound."""

    uncertainty: float
    disturbance: float

    @property
    def product(self) -> float:
        return self.uncertainty * self.disturbance


def uncertainty_disturbance_product(
    probe: ProbeSpec, coupling: CouplingParams
) -> UncertaintyDisturbance:
    eps = coupling.epsilon
    return UncertaintyDisturbance(
        uncertainty=probe.sigma_Q / eps, disturbance=eps * probe.sigma_P
    )


def histogram_l1_distance(
    samples: np.ndarray, grid: Grid1D, density: np.ndarray, bins: int = 24
) -> float:
    """L1 distance between a sample histogram and bin-integrated model mass.

    The model density (given on ``grid``) is integrated over each bin through
    its cumulative trapezoid, so the comparison carries no binning bias.
    """
    edges = np.linspace(grid.lo, grid.hi, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    outside = samples.size - counts.sum()
    empirical = counts / samples.size
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * grid.h)])
    model = np.diff(np.interp(edges, grid.nodes, cdf))
    return float(np.sum(np.abs(empirical - model)) + outside / samples.size)


def periodic_histogram_l1_distance(
    samples: np.ndarray, density_nodes: np.ndarray, density: np.ndarray, bins: int = 24
) -> float:
    """Same as above on [0, 2pi) with periodic rectangle-rule bin masses."""
    edges = np.linspace(0.0, TWO_PI, bins + 1)
    counts, _ = np.histogram(np.mod(samples, TWO_PI), bins=edges)
    empirical = counts / samples.size
    h = density_nodes[1] - density_nodes[0]
    ext_nodes = np.concatenate([density_nodes, [TWO_PI]])
    ext_density = np.concatenate([density, [density[0]]])
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (ext_density[1:] + ext_density[:-1]) * h)])
    model = np.diff(np.interp(edges, ext_nodes, cdf))
    return float(np.sum(np.abs(empirical - model)))
