"""Quantum measurement channel: pointer statistics, decoherence, conditioning.

The impulsive system-probe coupling imprints the measured observable on the
probe position. Averaging over the Gaussian probe momentum damps coherences
between eigenspaces by g_mn = exp(-tau (a_m - a_n)^2 / hbar^2); conditioning
on a sharp pointer reading selects one eigenspace. The exact channel is
evaluated in the observable's eigenbasis (elementwise kernel multiply); the
Lindblad right-hand side -[A,[A,rho]]/hbar^2 is kept as an independent
verification surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    KernelMismatch,
    NegligibleProbability,
    NonHermitianObservable,
)
from .grids import Grid1D
from .observables import CouplingParams, ProbeSpec, SpectralObservable
from .states import DensityOperator, trace_with


@dataclass(frozen=True)
class DecoherenceKernel:
    """Off-diagonal damping factors g_mn over eigenvalue index pairs."""

    gmn: np.ndarray
    tau: float
    hbar: float
    eigenvalues: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gmn, dtype=float)
        g.flags.writeable = False
        object.__setattr__(self, "gmn", g)
        ev = np.asarray(self.eigenvalues, dtype=float)
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)


def decoherence_kernel(
    obs: SpectralObservable, coupling: CouplingParams, hbar: float = 1.0
) -> DecoherenceKernel:
    """g_mn = exp(-tau (a_m - a_n)^2 / hbar^2) for a Gaussian probe momentum."""
    a = obs.eigenvalues
    diff = a[:, None] - a[None, :]
    g = np.exp(-coupling.tau * diff**2 / hbar**2)
    return DecoherenceKernel(gmn=g, tau=coupling.tau, hbar=hbar, eigenvalues=a.copy())


def decoherence_kernel_quadrature(
    obs: SpectralObservable,
    coupling: CouplingParams,
    hbar: float = 1.0,
    n: int = 20001,
    span_sigmas: float = 12.0,
) -> np.ndarray:
    """g_mn by direct quadrature of the probe-momentum Fourier integral.

    Independent of the closed form above; used as its oracle.
    """
    sigma_P = coupling.sigma_P
    a = obs.eigenvalues
    if sigma_P == 0.0:
        return np.ones((a.size, a.size))
    P = np.linspace(-span_sigmas * sigma_P, span_sigmas * sigma_P, n)
    w = np.full(n, P[1] - P[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    dens = np.exp(-0.5 * (P / sigma_P) ** 2) / np.sqrt(2.0 * np.pi * sigma_P**2)
    diff = (a[:, None] - a[None, :]).ravel()
    phases = np.exp(-1j * coupling.epsilon / hbar * np.outer(diff, P))
    g = phases @ (dens * w)
    return np.real(g).reshape(a.size, a.size)


def born_weights(rho_s: DensityOperator, obs: SpectralObservable) -> np.ndarray:
    """p_s(a_n) = Tr(rho P_n) for every eigenvalue, in spectral order."""
    if obs.dim != rho_s.dim:
        raise DimensionMismatch("observable and state dimensions differ")
    rot = obs.to_eigenbasis(rho_s.matrix)
    diag = np.real(np.diag(rot))
    _, blocks = obs._layout
    return np.bincount(blocks, weights=diag, minlength=obs.n_eigenvalues)


def auto_pointer_grid(
    obs: SpectralObservable,
    probe: ProbeSpec,
    coupling: CouplingParams,
    n: int = 1024,
    pad_sigmas: float = 8.0,
) -> Grid1D:
    """Q grid covering every shifted peak epsilon*a_n with Gaussian margins."""
    lo = coupling.epsilon * obs.eigenvalues.min() - pad_sigmas * probe.sigma_Q
    hi = coupling.epsilon * obs.eigenvalues.max() + pad_sigmas * probe.sigma_Q
    return Grid1D(lo, hi, n)


def pointer_distribution(
    rho_s: DensityOperator,
    obs: SpectralObservable,
    probe: ProbeSpec,
    coupling: CouplingParams,
    Qgrid: Grid1D,
) -> np.ndarray:
    """Probe-position density after the interaction, sampled on Qgrid.

    Sum over eigenvalues of (Born weight) x (probe position density shifted
    by epsilon*a_n). Normalized on its own once the grid holds all peaks.
    """
    w = born_weights(rho_s, obs)
    Q = Qgrid.nodes
    out = np.zeros(Qgrid.n)
    for a_n, w_n in zip(obs.eigenvalues, w):
        out += w_n * probe.position_density(Q - coupling.epsilon * a_n)
    return out


def pointer_mean(
    rho_s: DensityOperator, obs: SpectralObservable, coupling: CouplingParams
) -> float:
    """<Q>' = epsilon * <A>, the mean pointer shift (probe mean is zero)."""
    return coupling.epsilon * float(np.real(trace_with(rho_s, obs.matrix())))


def _kernel_channel(
    rho_s: DensityOperator, obs: SpectralObservable, block_factors: np.ndarray
) -> DensityOperator:
    """Conjugate into the eigenbasis, scale block pairs, conjugate back."""
    _, blocks = obs._layout
    factors = block_factors[np.ix_(blocks, blocks)]
    rot = obs.to_eigenbasis(rho_s.matrix)
    out = obs.from_eigenbasis(factors * rot)
    return DensityOperator(out, grid=rho_s.grid)


def reduced_state_post(
    rho_s: DensityOperator, obs: SpectralObservable, kernel: DecoherenceKernel
) -> DensityOperator:
    """Post-measurement reduced state: sum_mn g_mn P_m rho P_n.

    Diagonal blocks in the eigenbasis are untouched (g_nn = 1), so the
    measured observable's outcome distribution is exactly preserved.
    """
    if obs.dim != rho_s.dim:
        raise DimensionMismatch("observable and state dimensions differ")
    if kernel.gmn.shape != (obs.n_eigenvalues, obs.n_eigenvalues) or not np.array_equal(
        kernel.eigenvalues, obs.eigenvalues
    ):
        raise KernelMismatch("kernel was built for a different observable")
    return _kernel_channel(rho_s, obs, kernel.gmn)


def lueders_nonselective(rho_s: DensityOperator, obs: SpectralObservable) -> DensityOperator:
    """Pinching sum_n P_n rho P_n: the infinite-coupling limit of the channel."""
    if obs.dim != rho_s.dim:
        raise DimensionMismatch("observable and state dimensions differ")
    same_block = np.eye(obs.n_eigenvalues)
    return _kernel_channel(rho_s, obs, same_block)


def lindblad_evolve(
    rho_s: DensityOperator, obs_matrix: np.ndarray, tau: float, hbar: float = 1.0
) -> DensityOperator:
    """Exact solution at strength tau of drho/dtau = -[A,[A,rho]]/hbar^2."""
    a = np.asarray(obs_matrix)
    if np.max(np.abs(a - a.conj().T)) > 1e-12:
        raise NonHermitianObservable("observable matrix is not Hermitian")
    if a.shape != rho_s.matrix.shape:
        raise DimensionMismatch("observable and state dimensions differ")
    vals, vecs = np.linalg.eigh(a)
    diff = vals[:, None] - vals[None, :]
    g = np.exp(-tau * diff**2 / hbar**2)
    rot = vecs.conj().T @ rho_s.matrix @ vecs
    out = vecs @ (g * rot) @ vecs.conj().T
    return DensityOperator(out, grid=rho_s.grid)


def lindblad_rhs(rho: DensityOperator, obs_matrix: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    """-[A,[A,rho]]/hbar^2, the generator of the channel."""
    a = np.asarray(obs_matrix)
    if np.max(np.abs(a - a.conj().T)) > 1e-12:
        raise NonHermitianObservable("observable matrix is not Hermitian")
    inner = a @ rho.matrix - rho.matrix @ a
    return -(a @ inner - inner @ a) / hbar**2


def conditional_state(
    rho_s: DensityOperator,
    obs: SpectralObservable,
    probe: ProbeSpec,
    coupling: CouplingParams,
    Q: float,
) -> DensityOperator:
    """Reduced state conditioned on reading probe position Q (pure Gaussian probe).

    With a narrow probe and Q near epsilon*a_nu this collapses onto the
    selected eigenspace, P_nu rho P_nu / Tr(rho P_nu).
    """
    if obs.dim != rho_s.dim:
        raise DimensionMismatch("observable and state dimensions differ")
    chi = probe.position_wavefunction(Q - coupling.epsilon * obs.eigenvalues)
    weights = born_weights(rho_s, obs)
    denom = float(np.sum(weights * chi**2))
    if denom < 1e-12:
        raise NegligibleProbability(f"pointer value Q={Q} has probability {denom:.3e}")
    numerator_factors = np.outer(chi, chi)
    out = _kernel_channel(rho_s, obs, numerator_factors)
    return DensityOperator(out.matrix / denom, grid=rho_s.grid)


def conditional_probability_density(
    rho_s: DensityOperator,
    obs: SpectralObservable,
    probe: ProbeSpec,
    coupling: CouplingParams,
    Q: float,
) -> float:
    """p'_pi(Q) for a pure Gaussian probe; the normalizer of conditioning."""
    chi = probe.position_wavefunction(Q - coupling.epsilon * obs.eigenvalues)
    weights = born_weights(rho_s, obs)
    return float(np.sum(weights * chi**2))


def position_disturbance_scale(
    rho_s: DensityOperator, coupling: CouplingParams, hbar: float = 1.0
) -> float:
    """Reported disturbance scale (epsilon/hbar) * sigma_P * sqrt(var(x)).

    A scaling estimate only; nothing is asserted against it.
    """
    if rho_s.grid is None:
        raise DimensionMismatch("disturbance scale is defined on a position grid")
    x = rho_s.grid.nodes
    dens = rho_s.position_density()
    mean = rho_s.grid.integrate(x * dens)
    var = rho_s.grid.integrate((x - mean) ** 2 * dens)
    return coupling.epsilon / hbar * coupling.sigma_P * np.sqrt(var)
