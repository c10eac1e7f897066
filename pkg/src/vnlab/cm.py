"""Classical measurement channel: Liouville flow, diffusion, conditioning.

The impulsive coupling shifts the probe position by epsilon*A(q, p) and kicks
the system along the generator A_op = (dA/dq) d/dp - (dA/dp) d/dq. Averaging
over the Gaussian probe momentum turns the kick into the channel
exp(tau * A_op^2): momentum diffusion for A = q, angle diffusion for A(xi),
and a degenerate diffusion transverse to A's level sets in general. Exact
flow/convolution/spectral solvers cover the first two kinds; the general kind
falls back to explicit stepping of the double-bracket PDE.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import convolve1d

from .errors import (
    InvariantViolation,
    ModeCutoffTooSmall,
    NegligibleProbability,
    StepSizeTooLarge,
    UnsupportedObservable,
)
from .grids import TWO_PI, Grid1D, grid2d_integrate
from .observables import (
    KIND_ACTION,
    KIND_GENERAL,
    KIND_POSITION,
    ClassicalObservable,
    CouplingParams,
    ProbeSpec,
)
from .states import (
    AngleActionDensity,
    PhaseSpaceDensity,
    expectation,
    from_angle_action,
    sample_phase_density,
    to_angle_action,
)

NEGATIVITY_MONITOR = -1e-10


def _require_independent(probe: ProbeSpec) -> None:
    # The factorized probe density rho_pi(Q) * rho_pi(P) underlies every
    # marginalization below.
    if not probe.independent:
        raise InvariantViolation("this operation requires an independent (Q, P) probe")


# ---------------------------------------------------------------------------
# The Liouville generator
# ---------------------------------------------------------------------------

def apply_liouville_generator(
    values: np.ndarray, qgrid: Grid1D, pgrid: Grid1D, obs: ClassicalObservable
) -> np.ndarray:
    """A_op f = (dA/dq) df/dp - (dA/dp) df/dq on the grid.

    Coefficients come from the observable's supplied derivative maps; the
    operand derivatives are second-order centered differences.
    """
    qq, pp = np.meshgrid(qgrid.nodes, pgrid.nodes, indexing="ij")
    df_dq = np.gradient(values, qgrid.h, axis=0, edge_order=2)
    df_dp = np.gradient(values, pgrid.h, axis=1, edge_order=2)
    return obs.dA_dq(qq, pp) * df_dp - obs.dA_dp(qq, pp) * df_dq


MODE_FLOW_SHIFT = "flow-shift"
MODE_FINITE_DIFFERENCE = "finite-difference"


@dataclass(frozen=True)
class LiouvilleGenerator:
    """The generator paired with how it is applied for its observable kind."""

    observable: ClassicalObservable
    mode: str

    @classmethod
    def from_observable(cls, obs: ClassicalObservable) -> "LiouvilleGenerator":
        mode = MODE_FINITE_DIFFERENCE if obs.kind == KIND_GENERAL else MODE_FLOW_SHIFT
        return cls(observable=obs, mode=mode)

    def apply(self, values, qgrid, pgrid) -> np.ndarray:
        return apply_liouville_generator(values, qgrid, pgrid, self.observable)

    def self_annihilation_residual(self, qgrid, pgrid) -> float:
        """max |A_op A| on the grid; zero analytically."""
        qq, pp = np.meshgrid(qgrid.nodes, pgrid.nodes, indexing="ij")
        return float(np.max(np.abs(self.apply(self.observable.eval(qq, pp), qgrid, pgrid))))

    def product_rule_residual(self, f, g, qgrid, pgrid) -> float:
        """max |A_op(fg) - (A_op f) g - f (A_op g)|; finite-difference scale."""
        lhs = self.apply(f * g, qgrid, pgrid)
        rhs = self.apply(f, qgrid, pgrid) * g + f * self.apply(g, qgrid, pgrid)
        return float(np.max(np.abs(lhs - rhs)))


def flow_map(obs: ClassicalObservable, q, p, s):
    """The map m_s with exp(s A_op) f = f o m_s.

    Characteristics: dq/ds = -dA/dp, dp/ds = +dA/dq. For A = q this is
    (q, p) -> (q, p + s); for A(xi) it advances the angle by s * dA/dxi at
    fixed xi. Signs are pinned by the A = q anchor.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if obs.kind == KIND_POSITION:
        return q + 0.0 * s, p + s
    if obs.kind == KIND_ACTION:
        xi = 0.5 * (q * q + p * p)
        theta = np.arctan2(p, q) + s * obs.dA_dxi(xi)
        r = np.sqrt(2.0 * xi)
        return r * np.cos(theta), r * np.sin(theta)
    raise UnsupportedObservable("no exact flow map for general observables")


# ---------------------------------------------------------------------------
# Joint system-probe state after the interaction
# ---------------------------------------------------------------------------

ORDER_FLOW_SYSTEM = "flow-system"     # flow applied to the system factor only
ORDER_FLOW_PRODUCT = "flow-product"   # flow applied to the full product

MAX_JOINT_CELLS = 64**4


@dataclass(frozen=True)
class JointEvolvedState:
    """rho'(q, p, Q, P): materialized 4-axis array or a lazy evaluator."""

    qgrid: Grid1D
    pgrid: Grid1D
    Qgrid: Grid1D
    Pgrid: Grid1D
    density: np.ndarray | None = None
    evaluator: Callable | None = None

    def values(self) -> np.ndarray:
        if self.density is not None:
            return self.density
        return self.evaluator(
            self.qgrid.nodes, self.pgrid.nodes, self.Qgrid.nodes, self.Pgrid.nodes
        )

    def mass(self) -> float:
        v = self.values()
        for g in (self.Pgrid, self.Qgrid, self.pgrid, self.qgrid):
            v = v @ g.weights if v.ndim == 1 else np.tensordot(v, g.weights, axes=([-1], [0]))
        return float(v)

    def probe_position_marginal(self) -> np.ndarray:
        v = np.tensordot(self.values(), self.Pgrid.weights, axes=([3], [0]))
        v = np.tensordot(self.qgrid.weights, v, axes=([0], [0]))
        return self.pgrid.weights @ v


def joint_state_post(
    rho_s: PhaseSpaceDensity,
    probe: ProbeSpec,
    obs: ClassicalObservable,
    coupling: CouplingParams,
    Qgrid: Grid1D,
    Pgrid: Grid1D,
    ordering: str = ORDER_FLOW_SYSTEM,
    max_cells: int = MAX_JOINT_CELLS,
) -> JointEvolvedState:
    """Joint state after the kick, in either of the two commuting factorizations.

    ``flow-system`` evaluates [exp(eps*A_op*P) rho_s](q,p) * rho_pi(Q - eps*A(q,p), P);
    ``flow-product`` applies the flow to the whole bracketed product, i.e. the
    probe shift uses A evaluated at the flowed phase-space point. The two
    factors commute, so both orderings agree.

    Requires sigma_P > 0 (the P axis carries a density) and an observable kind
    with an exact flow map.
    """
    _require_independent(probe)
    if obs.kind == KIND_GENERAL:
        raise UnsupportedObservable("joint evolution needs a position or action observable")
    if ordering not in (ORDER_FLOW_SYSTEM, ORDER_FLOW_PRODUCT):
        raise InvariantViolation(f"unknown ordering {ordering!r}")
    eps = coupling.epsilon

    def evaluate(qn, pn, Qn, Pn):
        qq, pp, PP = np.meshgrid(qn, pn, Pn, indexing="ij")
        fq, fp = flow_map(obs, qq, pp, eps * PP)
        system = sample_phase_density(rho_s, fq, fp)          # (nq, np, nP)
        mom = probe.momentum_density(Pn)
        if ordering == ORDER_FLOW_PRODUCT:
            a = obs.eval(fq, fp)                              # (nq, np, nP)
            pos = probe.position_density(Qn[None, None, None, :] - eps * a[..., None])
            return np.einsum("ijl,ijlk,l->ijkl", system, pos, mom, optimize=True)
        a = obs.eval(*np.meshgrid(qn, pn, indexing="ij"))     # (nq, np)
        pos = probe.position_density(Qn[None, None, :] - eps * a[..., None])
        return np.einsum("ijl,ijk,l->ijkl", system, pos, mom, optimize=True)

    cells = rho_s.qgrid.n * rho_s.pgrid.n * Qgrid.n * Pgrid.n
    if cells <= max_cells:
        dens = evaluate(rho_s.qgrid.nodes, rho_s.pgrid.nodes, Qgrid.nodes, Pgrid.nodes)
        return JointEvolvedState(rho_s.qgrid, rho_s.pgrid, Qgrid, Pgrid, density=dens)
    return JointEvolvedState(rho_s.qgrid, rho_s.pgrid, Qgrid, Pgrid, evaluator=evaluate)


# ---------------------------------------------------------------------------
# Probe marginals
# ---------------------------------------------------------------------------

def auto_probe_grid(
    rho_s,
    obs: ClassicalObservable,
    probe: ProbeSpec,
    coupling: CouplingParams,
    n: int = 1024,
    pad_sigmas: float = 8.0,
) -> Grid1D:
    """Q grid covering epsilon*A over the state's support, with Gaussian margins."""
    if isinstance(rho_s, AngleActionDensity):
        a = obs.A_of_xi(rho_s.xigrid.nodes)
    else:
        qq, pp = np.meshgrid(rho_s.qgrid.nodes, rho_s.pgrid.nodes, indexing="ij")
        a = obs.eval(qq, pp)
    lo = coupling.epsilon * float(np.min(a)) - pad_sigmas * probe.sigma_Q
    hi = coupling.epsilon * float(np.max(a)) + pad_sigmas * probe.sigma_Q
    return Grid1D(lo, hi, n)


def probe_marginal_Q(
    rho_s,
    probe: ProbeSpec,
    obs: ClassicalObservable,
    coupling: CouplingParams,
    Qgrid: Grid1D,
) -> np.ndarray:
    """rho'_pi(Q) = int rho_s * rho_pi(Q - eps*A) over the system state.

    For A = q this reduces to a convolution of the q-marginal with the probe
    position density; an action observable on an angle-action state reduces to
    a 1-D integral over xi.
    """
    _require_independent(probe)
    eps = coupling.epsilon
    Q = Qgrid.nodes
    if isinstance(rho_s, AngleActionDensity):
        if obs.A_of_xi is None:
            raise UnsupportedObservable("angle-action marginal needs A(xi)")
        weights = rho_s.xigrid.weights * rho_s.xi_marginal()
        a = obs.A_of_xi(rho_s.xigrid.nodes)
        return probe.position_density(Q[:, None] - eps * a[None, :]) @ weights
    if obs.kind == KIND_POSITION:
        weights = rho_s.qgrid.weights * rho_s.q_marginal()
        return probe.position_density(Q[:, None] - eps * rho_s.qgrid.nodes[None, :]) @ weights
    qq, pp = np.meshgrid(rho_s.qgrid.nodes, rho_s.pgrid.nodes, indexing="ij")
    a = obs.eval(qq, pp).ravel()
    cell = (np.outer(rho_s.qgrid.weights, rho_s.pgrid.weights) * rho_s.values).ravel()
    out = np.empty(Qgrid.n)
    chunk = max(1, 2**22 // a.size)
    for start in range(0, Qgrid.n, chunk):
        qs = Q[start : start + chunk, None]
        out[start : start + chunk] = probe.position_density(qs - eps * a[None, :]) @ cell
    return out


def probe_mean_Q(rho_s, obs: ClassicalObservable, coupling: CouplingParams) -> float:
    """<Q>' = epsilon * <A> (probe mean is zero)."""
    return coupling.epsilon * expectation(rho_s, obs)


# ---------------------------------------------------------------------------
# Reduced system state: the exp(tau * A_op^2) channel
# ---------------------------------------------------------------------------

def _monitored_clip(values: np.ndarray, where: str) -> np.ndarray:
    low = float(values.min(initial=0.0))
    if low < NEGATIVITY_MONITOR:
        raise InvariantViolation(f"{where}: negative excursion {low:.3e} beyond monitor")
    return np.clip(values, 0.0, None)


def _diffuse_rows_p(values: np.ndarray, h_p: float, sigmas: np.ndarray) -> np.ndarray:
    """Gaussian smoothing along the p axis, row sigma given per q node.

    Kernels wider than two grid steps are applied in real space (point-sampled,
    sum-normalized, absorbing ends); narrower ones multiply the p-spectrum by
    the exact Gaussian characteristic function, where wraparound is negligible.
    """
    out = np.empty_like(values)
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), (values.shape[0],))
    k_fft = TWO_PI * np.fft.rfftfreq(values.shape[1], d=h_p)

    def smooth_block(rows: np.ndarray, sigma: float) -> np.ndarray:
        if sigma == 0.0:
            return rows.copy()
        if sigma >= 2.0 * h_p:
            reach = int(np.ceil(7.0 * sigma / h_p))
            offsets = np.arange(-reach, reach + 1) * h_p
            kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
            kernel /= kernel.sum()
            return convolve1d(rows, kernel, axis=-1, mode="constant", cval=0.0)
        spectrum = np.fft.rfft(rows, axis=-1)
        spectrum *= np.exp(-0.5 * (sigma * k_fft) ** 2)
        return np.fft.irfft(spectrum, n=rows.shape[-1], axis=-1)

    if np.all(sigmas == sigmas[0]):
        out[:] = smooth_block(values, float(sigmas[0]))
    else:
        for i, s in enumerate(sigmas):
            out[i] = smooth_block(values[i : i + 1], float(s))[0]
    return out


def cm_diffusion_rhs(rho: PhaseSpaceDensity, obs: ClassicalObservable) -> np.ndarray:
    """[A, [A, rho]]_PB by nested centered differences; d^2/dp^2 for A = q."""
    inner = apply_liouville_generator(rho.values, rho.qgrid, rho.pgrid, obs)
    return apply_liouville_generator(inner, rho.qgrid, rho.pgrid, obs)


def pde_stability_bound(
    qgrid: Grid1D, pgrid: Grid1D, obs: ClassicalObservable
) -> float:
    qq, pp = np.meshgrid(qgrid.nodes, pgrid.nodes, indexing="ij")
    aq2 = float(np.max(obs.dA_dq(qq, pp) ** 2))
    ap2 = float(np.max(obs.dA_dp(qq, pp) ** 2))
    rate = aq2 / pgrid.h**2 + ap2 / qgrid.h**2
    if rate == 0.0:
        return np.inf
    return 0.25 / rate


def _pde_evolve(
    rho: PhaseSpaceDensity, obs: ClassicalObservable, tau: float, dtau: float | None
) -> PhaseSpaceDensity:
    bound = pde_stability_bound(rho.qgrid, rho.pgrid, obs)
    if dtau is not None and dtau > bound:
        raise StepSizeTooLarge(f"dtau={dtau:.3e} exceeds stability bound {bound:.3e}")
    step = min(dtau if dtau is not None else bound, tau)
    n_steps = int(np.ceil(tau / step))
    step = tau / n_steps
    values = rho.values.copy()
    work = PhaseSpaceDensity(rho.qgrid, rho.pgrid, values)
    for _ in range(n_steps):
        values = values + step * cm_diffusion_rhs(work, obs)
        work = PhaseSpaceDensity(rho.qgrid, rho.pgrid, values)
    return work


def reduced_state_post_cm(
    rho_s,
    obs: ClassicalObservable,
    tau: float,
    pde_dtau: float | None = None,
    mode_cutoff: int | None = None,
):
    """Reduced system state exp(tau * A_op^2) rho_s.

    Dispatch by observable kind: A = q gets the exact Gaussian convolution in
    p (kernel variance 2*tau*(dA/dq)^2); A(xi) gets the Fourier angle solver
    (on an angle-action state directly, otherwise through the canonical
    transform and back); anything else is explicit PDE stepping with a
    CFL-limited step. ``mode_cutoff`` defaults to every mode the theta grid
    represents, so the channel itself never truncates.
    """
    if tau < 0:
        raise InvariantViolation("tau must be >= 0")
    if tau == 0.0:
        return rho_s
    if isinstance(rho_s, AngleActionDensity):
        if obs.kind != KIND_ACTION:
            raise UnsupportedObservable("angle-action states pair with action observables")
        M = mode_cutoff if mode_cutoff is not None else rho_s.thetagrid.n // 2
        return angle_spectral_solve(rho_s, obs, tau, M=M)
    if obs.kind == KIND_POSITION:
        a = obs.dA_dq(rho_s.qgrid.nodes, np.zeros(rho_s.qgrid.n))
        sigmas = np.sqrt(2.0 * tau) * np.abs(a)
        values = _diffuse_rows_p(rho_s.values, rho_s.pgrid.h, sigmas)
        values = _monitored_clip(values, "position-kind channel")
        return PhaseSpaceDensity(rho_s.qgrid, rho_s.pgrid, values)
    if obs.kind == KIND_ACTION:
        aa = to_angle_action(rho_s)
        M = mode_cutoff if mode_cutoff is not None else aa.thetagrid.n // 2
        solved = angle_spectral_solve(aa, obs, tau, M=M)
        return from_angle_action(solved, rho_s.qgrid, rho_s.pgrid)
    return _pde_evolve(rho_s, obs, tau, pde_dtau)


# ---------------------------------------------------------------------------
# Angle diffusion: Fourier solver and the strong-coupling limit
# ---------------------------------------------------------------------------

DEFAULT_MODE_CUTOFF = 64


def angle_fourier_coefficients(rho: AngleActionDensity) -> tuple[np.ndarray, np.ndarray]:
    """(modes, c) with rho(xi, theta) = sum_m c_m(xi) exp(i m theta)."""
    n = rho.thetagrid.n
    c = np.fft.fft(rho.values, axis=1) / n
    modes = np.rint(n * np.fft.fftfreq(n)).astype(int)
    return modes, c


def angle_spectral_solve(
    rho: AngleActionDensity,
    obs: ClassicalObservable,
    tau: float,
    M: int = DEFAULT_MODE_CUTOFF,
) -> AngleActionDensity:
    """Damp angle mode m by exp(-m^2 (dA/dxi)^2 tau) at each xi.

    Mode 0 is untouched, so the xi-marginal is preserved exactly. Modes above
    the cutoff M are dropped; if they carry more than 1e-10 of L1 mass the
    cutoff is rejected.
    """
    if obs.dA_dxi is None:
        raise UnsupportedObservable("angle solver needs dA/dxi")
    modes, c = angle_fourier_coefficients(rho)
    kept = np.abs(modes) <= M
    dropped = np.abs(c[:, ~kept])
    if dropped.size:
        dropped_mass = TWO_PI * float(rho.xigrid.weights @ dropped.sum(axis=1))
        if dropped_mass > 1e-10:
            raise ModeCutoffTooSmall(
                f"modes above {M} carry L1 mass {dropped_mass:.3e} (> 1e-10)"
            )
    rate = (obs.dA_dxi(rho.xigrid.nodes) ** 2)[:, None] * (modes[None, :] ** 2)
    damped = np.where(kept[None, :], c * np.exp(-tau * rate), 0.0)
    values = np.real(np.fft.ifft(damped * rho.thetagrid.n, axis=1))
    values = _monitored_clip(values, "angle spectral solver")
    return AngleActionDensity(rho.xigrid, rho.thetagrid, values, fourier_coeffs=damped)


def strong_coupling_limit_cm(rho: AngleActionDensity) -> AngleActionDensity:
    """theta-average at each xi: the infinite-coupling (mode-0) limit."""
    avg = rho.values.mean(axis=1)
    values = np.repeat(avg[:, None], rho.thetagrid.n, axis=1)
    return AngleActionDensity(rho.xigrid, rho.thetagrid, values)


# ---------------------------------------------------------------------------
# Selective (conditioned) classical measurement
# ---------------------------------------------------------------------------

def conditional_state_cm(
    rho_s: PhaseSpaceDensity,
    probe: ProbeSpec,
    obs: ClassicalObservable,
    coupling: CouplingParams,
    Q: float,
) -> PhaseSpaceDensity:
    """State conditioned on reading probe position Q, for A = q.

    Numerator: the tau-diffused density times rho_pi(Q - eps*q) row by row;
    denominator: int rho_s(q') rho_pi(Q - eps*q') dq'. With a narrow probe and
    Q = eps*q0 the q-marginal concentrates at q0 while the momentum profile is
    the diffused conditional at q0.
    """
    _require_independent(probe)
    if obs.kind != KIND_POSITION:
        raise UnsupportedObservable("classical conditioning is implemented for A = q")
    eps = coupling.epsilon
    weight_q = probe.position_density(Q - eps * rho_s.qgrid.nodes)
    denom = float(rho_s.qgrid.weights @ (rho_s.q_marginal() * weight_q))
    if denom < 1e-12:
        raise NegligibleProbability(f"probe value Q={Q} has density {denom:.3e}")
    diffused = reduced_state_post_cm(rho_s, obs, coupling.tau)
    values = diffused.values * weight_q[:, None]
    norm = grid2d_integrate(rho_s.qgrid, rho_s.pgrid, values)
    return PhaseSpaceDensity(rho_s.qgrid, rho_s.pgrid, values / norm)
