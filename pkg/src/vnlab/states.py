"""State representations and their primitives.

Three state families are used throughout:

* ``PhaseSpaceDensity`` -- non-negative, unit-mass density on a uniform
  (q, p) grid; ``values[i, j]`` is rho(q_i, p_j).
* ``AngleActionDensity`` -- the same object in canonical (xi, theta)
  coordinates, theta periodic on [0, 2*pi); the Jacobian of the transform is
  one, so values carry over directly.
* ``DensityOperator`` -- Hermitian, PSD, unit-trace complex matrix, either on
  a position grid or in a truncated number basis. On a position grid the
  convention is ``matrix[i, j] = h * rho(x_i, x_j)`` so that the plain matrix
  trace is 1 and matrix algebra needs no quadrature weights.

All states are immutable after construction; every operation returns a new
object.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import (
    BasisMismatch,
    GridTooNarrow,
    InvariantViolation,
    LeakageBudgetExceeded,
    ShapeMismatch,
)
from .grids import TWO_PI, Grid1D, PeriodicGrid, UnitsConfig, grid2d_integrate
from .observables import ClassicalObservable, MixtureSpec, PureSuperposition

DEFAULT_LEAKAGE_BUDGET = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Classical phase-space density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpaceDensity:
    qgrid: Grid1D
    pgrid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.qgrid.n, self.pgrid.n):
            raise ShapeMismatch(
                f"values shape {v.shape} != grid shape {(self.qgrid.n, self.pgrid.n)}"
            )
        object.__setattr__(self, "values", _freeze(v))

    def mass(self) -> float:
        return grid2d_integrate(self.qgrid, self.pgrid, self.values)

    def q_marginal(self) -> np.ndarray:
        return self.values @ self.pgrid.weights

    def p_marginal(self) -> np.ndarray:
        return self.qgrid.weights @ self.values

    def edge_leakage(self, band: float = 0.05) -> float:
        """Mass inside the outer ``band`` fraction of either axis."""
        q, p = self.qgrid.nodes, self.pgrid.nodes
        qspan, pspan = self.qgrid.hi - self.qgrid.lo, self.pgrid.hi - self.pgrid.lo
        inner_q = (q >= self.qgrid.lo + band * qspan) & (q <= self.qgrid.hi - band * qspan)
        inner_p = (p >= self.pgrid.lo + band * pspan) & (p <= self.pgrid.hi - band * pspan)
        interior = self.values * inner_q[:, None] * inner_p[None, :]
        return self.mass() - grid2d_integrate(self.qgrid, self.pgrid, interior)

    def validate(
        self,
        mass_tol: float = 1e-8,
        negativity_tol: float = -1e-12,
        leakage_budget: float | None = DEFAULT_LEAKAGE_BUDGET,
    ) -> None:
        if float(self.values.min(initial=0.0)) < negativity_tol:
            raise InvariantViolation(
                f"density has negative values down to {self.values.min():.3e}"
            )
        m = self.mass()
        if abs(m - 1.0) > mass_tol:
            raise InvariantViolation(f"density mass {m!r} deviates from 1 beyond {mass_tol}")
        if leakage_budget is not None:
            leak = self.edge_leakage()
            if leak > leakage_budget:
                raise LeakageBudgetExceeded(
                    f"edge-band mass {leak:.3e} exceeds budget {leakage_budget:.1e}"
                )

    def normalized(self) -> "PhaseSpaceDensity":
        return replace(self, values=self.values / self.mass())


def phase_density_from_values(qgrid, pgrid, values, normalize=True) -> PhaseSpaceDensity:
    v = np.clip(np.asarray(values, dtype=float), 0.0, None)
    rho = PhaseSpaceDensity(qgrid, pgrid, v)
    return rho.normalized() if normalize else rho


def phase_density_from_function(qgrid, pgrid, f, normalize=True) -> PhaseSpaceDensity:
    qq, pp = np.meshgrid(qgrid.nodes, pgrid.nodes, indexing="ij")
    return phase_density_from_values(qgrid, pgrid, f(qq, pp), normalize=normalize)


def build_gaussian_phase_density(
    qgrid: Grid1D,
    pgrid: Grid1D,
    sigma_q: float,
    sigma_p: float,
    center_q: float = 0.0,
    center_p: float = 0.0,
) -> PhaseSpaceDensity:
    """Product Gaussian, normalized on the grid.

    Raises GridTooNarrow unless +-6 sigma around the center fits inside both
    grids, which keeps truncated mass near machine level.
    """
    if center_q - 6 * sigma_q < qgrid.lo or center_q + 6 * sigma_q > qgrid.hi:
        raise GridTooNarrow("q grid does not contain center +- 6 sigma_q")
    if center_p - 6 * sigma_p < pgrid.lo or center_p + 6 * sigma_p > pgrid.hi:
        raise GridTooNarrow("p grid does not contain center +- 6 sigma_p")
    gq = np.exp(-0.5 * ((qgrid.nodes - center_q) / sigma_q) ** 2)
    gp = np.exp(-0.5 * ((pgrid.nodes - center_p) / sigma_p) ** 2)
    values = np.outer(gq, gp) / (TWO_PI * sigma_q * sigma_p)
    return phase_density_from_values(qgrid, pgrid, values)


def mix_phase_densities(spec: MixtureSpec) -> PhaseSpaceDensity:
    a, b = spec.components
    if a.qgrid != b.qgrid or a.pgrid != b.pgrid:
        raise ShapeMismatch("mixture components must share grids")
    return PhaseSpaceDensity(a.qgrid, a.pgrid, spec.p1 * a.values + spec.p2 * b.values)


def delta_width(grid: Grid1D) -> float:
    """Width of the narrow Gaussian standing in for a Dirac delta: 2 grid steps."""
    return 2.0 * grid.h


# ---------------------------------------------------------------------------
# Angle-action representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngleActionDensity:
    xigrid: Grid1D
    thetagrid: PeriodicGrid
    values: np.ndarray
    fourier_coeffs: np.ndarray | None = None

    def __post_init__(self):
        if self.xigrid.lo != 0.0:
            raise InvariantViolation("xi grid must start at 0")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.xigrid.n, self.thetagrid.n):
            raise ShapeMismatch("values shape does not match (xi, theta) grids")
        object.__setattr__(self, "values", _freeze(v))
        if self.fourier_coeffs is not None:
            object.__setattr__(self, "fourier_coeffs", _freeze(np.asarray(self.fourier_coeffs)))

    def mass(self) -> float:
        return grid2d_integrate(self.xigrid, self.thetagrid, self.values)

    def xi_marginal(self) -> np.ndarray:
        return self.values @ self.thetagrid.weights

    def theta_marginal(self) -> np.ndarray:
        return self.xigrid.weights @ self.values

    def validate(self, mass_tol: float = 1e-8, negativity_tol: float = -1e-12) -> None:
        if float(self.values.min(initial=0.0)) < negativity_tol:
            raise InvariantViolation("angle-action density has negative values")
        m = self.mass()
        if abs(m - 1.0) > mass_tol:
            raise InvariantViolation(f"angle-action mass {m!r} deviates from 1")

    def normalized(self) -> "AngleActionDensity":
        return replace(self, values=self.values / self.mass(), fourier_coeffs=None)


def angle_density_from_function(xigrid, thetagrid, f, normalize=True) -> AngleActionDensity:
    xx, tt = np.meshgrid(xigrid.nodes, thetagrid.nodes, indexing="ij")
    v = np.clip(np.asarray(f(xx, tt), dtype=float), 0.0, None)
    rho = AngleActionDensity(xigrid, thetagrid, v)
    return rho.normalized() if normalize else rho


# ---------------------------------------------------------------------------
# Interpolation and the canonical transform
# ---------------------------------------------------------------------------

def _spline(xnodes, ynodes, values) -> RectBivariateSpline:
    return RectBivariateSpline(xnodes, ynodes, values, kx=3, ky=3, s=0)


def sample_phase_density(rho: PhaseSpaceDensity, q_pts, p_pts) -> np.ndarray:
    """Cubic-spline samples of rho at arbitrary points, clipped at zero.

    Points outside the grid evaluate to 0 (compact-support convention).
    """
    sp = _spline(rho.qgrid.nodes, rho.pgrid.nodes, rho.values)
    q = np.asarray(q_pts, dtype=float)
    p = np.asarray(p_pts, dtype=float)
    out = sp.ev(q.ravel(), p.ravel()).reshape(q.shape)
    inside = (
        (q >= rho.qgrid.lo) & (q <= rho.qgrid.hi)
        & (p >= rho.pgrid.lo) & (p <= rho.pgrid.hi)
    )
    return np.clip(np.where(inside, out, 0.0), 0.0, None)


def to_bar_coordinates(rho: PhaseSpaceDensity, units: UnitsConfig) -> PhaseSpaceDensity:
    """Rescale (q, p) -> (qbar, pbar) = (C q, p / C); the Jacobian is one."""
    c = units.scale_C
    if c == 1.0:
        return rho
    qbar = Grid1D(c * rho.qgrid.lo, c * rho.qgrid.hi, rho.qgrid.n)
    pbar = Grid1D(rho.pgrid.lo / c, rho.pgrid.hi / c, rho.pgrid.n)
    return PhaseSpaceDensity(qbar, pbar, rho.values)


def from_bar_coordinates(rho: PhaseSpaceDensity, units: UnitsConfig) -> PhaseSpaceDensity:
    inv = UnitsConfig(hbar=units.hbar, scale_C=1.0 / units.scale_C)
    return to_bar_coordinates(rho, inv)


def to_angle_action(
    rho: PhaseSpaceDensity,
    units: UnitsConfig = UnitsConfig(),
    n_xi: int = 256,
    n_theta: int = 256,
    xi_max: float | None = None,
) -> AngleActionDensity:
    """Resample onto (xi, theta) with xi = (qbar^2 + pbar^2)/2.

    The rescaling qbar = C q, pbar = p / C is applied first. The default
    xi_max is the inscribed disc, so no sample ever falls outside the source
    grid. dqbar dpbar = dxi dtheta, so values carry over with no Jacobian
    factor; the result is renormalized (corner mass outside the disc must be
    negligible for the input to be represented faithfully).
    """
    bar = to_bar_coordinates(rho, units)
    reach = min(abs(bar.qgrid.lo), bar.qgrid.hi, abs(bar.pgrid.lo), bar.pgrid.hi)
    if xi_max is None:
        xi_max = 0.5 * reach**2
    elif np.sqrt(2.0 * xi_max) > reach:
        raise GridTooNarrow("xi_max reaches outside the Cartesian grid")
    xigrid = Grid1D(0.0, xi_max, n_xi)
    thetagrid = PeriodicGrid(n_theta)
    xx, tt = np.meshgrid(xigrid.nodes, thetagrid.nodes, indexing="ij")
    r = np.sqrt(2.0 * xx)
    vals = sample_phase_density(bar, r * np.cos(tt), r * np.sin(tt))
    return AngleActionDensity(xigrid, thetagrid, vals).normalized()


def from_angle_action(
    aa: AngleActionDensity,
    qgrid: Grid1D,
    pgrid: Grid1D,
    units: UnitsConfig = UnitsConfig(),
) -> PhaseSpaceDensity:
    """Inverse resampling of ``to_angle_action`` onto a Cartesian grid."""
    c = units.scale_C
    qq, pp = np.meshgrid(qgrid.nodes * c, pgrid.nodes / c, indexing="ij")
    xi = 0.5 * (qq**2 + pp**2)
    theta = np.mod(np.arctan2(pp, qq), TWO_PI)
    # Pad theta periodically so the spline sees smooth data across the seam.
    pad = 4
    tnodes = aa.thetagrid.nodes
    text = np.concatenate([tnodes[-pad:] - TWO_PI, tnodes, tnodes[:pad] + TWO_PI])
    vext = np.concatenate([aa.values[:, -pad:], aa.values, aa.values[:, :pad]], axis=1)
    sp = _spline(aa.xigrid.nodes, text, vext)
    vals = sp.ev(xi.ravel(), theta.ravel()).reshape(xi.shape)
    vals = np.where(xi <= aa.xigrid.hi, vals, 0.0)
    return PhaseSpaceDensity(qgrid, pgrid, np.clip(vals, 0.0, None)).normalized()


# ---------------------------------------------------------------------------
# Quantum density operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, PSD, unit-trace matrix; position-grid basis when grid is set."""

    matrix: np.ndarray
    grid: Grid1D | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeMismatch("density matrix must be square")
        if self.grid is not None and self.grid.n != m.shape[0]:
            raise ShapeMismatch("matrix dimension does not match the position grid")
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_position_basis(self) -> bool:
        return self.grid is not None

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def position_density(self) -> np.ndarray:
        """Diagonal as a continuum density rho(x, x) on the grid nodes."""
        if self.grid is None:
            raise BasisMismatch("position density needs a position-grid basis")
        return np.real(np.diag(self.matrix)) / self.grid.h

    def validate(
        self,
        hermiticity_tol: float = 1e-12,
        trace_tol: float = 1e-10,
        eigen_tol: float = -1e-10,
    ) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > hermiticity_tol:
            raise InvariantViolation("density matrix is not Hermitian within tolerance")
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise InvariantViolation(f"trace {np.trace(m)!r} deviates from 1")
        w = np.linalg.eigvalsh(m)
        if w.min() < eigen_tol:
            raise InvariantViolation(f"minimum eigenvalue {w.min():.3e} below {eigen_tol}")

    def normalized(self) -> "DensityOperator":
        return replace(self, matrix=self.matrix / np.trace(self.matrix))


def density_from_wavefunction(psi, grid: Grid1D) -> DensityOperator:
    """Pure state from samples of psi(x); psi is L2-normalized on the grid."""
    psi = np.asarray(psi, dtype=complex)
    norm = grid.integrate(np.abs(psi) ** 2)
    psi = psi / np.sqrt(norm)
    return DensityOperator(grid.h * np.outer(psi, psi.conj()), grid=grid)


def gaussian_wavepacket(grid: Grid1D, center=0.0, momentum=0.0, sigma_x=1.0, hbar=1.0):
    """Minimum-uncertainty packet: |psi|^2 has standard deviation sigma_x."""
    if center - 6 * sigma_x < grid.lo or center + 6 * sigma_x > grid.hi:
        raise GridTooNarrow("grid does not contain the packet +- 6 sigma_x")
    x = grid.nodes
    psi = (2.0 * np.pi * sigma_x**2) ** (-0.25) * np.exp(
        -((x - center) ** 2) / (4.0 * sigma_x**2) + 1j * momentum * x / hbar
    )
    return psi


def superposition_wavefunction(sup: PureSuperposition, grid: Grid1D) -> np.ndarray:
    """Normalized alpha*psi1 + beta*psi2 on the grid."""
    psi = sup.alpha * np.asarray(sup.psi1) + sup.beta * np.asarray(sup.psi2)
    norm = grid.integrate(np.abs(psi) ** 2)
    if norm <= 0:
        raise InvariantViolation("superposition has vanishing norm")
    return psi / np.sqrt(norm)


def mix_density_operators(spec: MixtureSpec) -> DensityOperator:
    a, b = spec.components
    if a.dim != b.dim or a.grid != b.grid:
        raise ShapeMismatch("mixture components must share basis and dimension")
    return DensityOperator(spec.p1 * a.matrix + spec.p2 * b.matrix, grid=a.grid)


def thermal_number_state(mean_occupation: float, dim: int) -> DensityOperator:
    """Geometric (thermal) diagonal state in a truncated number basis."""
    nbar = mean_occupation
    r = nbar / (1.0 + nbar)
    w = (1.0 - r) * r ** np.arange(dim)
    return DensityOperator(np.diag(w / w.sum()).astype(complex))


# ---------------------------------------------------------------------------
# Marginals, expectations, traces
# ---------------------------------------------------------------------------

def marginal(rho: PhaseSpaceDensity, axis: str) -> np.ndarray:
    """Marginal of a phase-space density along 'q' or 'p'."""
    if axis == "q":
        return rho.q_marginal()
    if axis == "p":
        return rho.p_marginal()
    raise ShapeMismatch(f"unknown marginal axis {axis!r}")


def expectation(state, observable) -> float:
    """<A> for classical states.

    ``observable`` is a ClassicalObservable, a callable f(q, p) (phase-space
    state), or a callable f(xi) (angle-action state).
    """
    if isinstance(state, PhaseSpaceDensity):
        qq, pp = np.meshgrid(state.qgrid.nodes, state.pgrid.nodes, indexing="ij")
        f = observable.eval if isinstance(observable, ClassicalObservable) else observable
        a = np.asarray(f(qq, pp), dtype=float)
        if a.shape != state.values.shape:
            raise ShapeMismatch("observable values do not match the state grid")
        return grid2d_integrate(state.qgrid, state.pgrid, a * state.values)
    if isinstance(state, AngleActionDensity):
        if isinstance(observable, ClassicalObservable):
            if observable.A_of_xi is None:
                raise ShapeMismatch("angle-action expectation needs A(xi)")
            f = observable.A_of_xi
        else:
            f = observable
        a = np.asarray(f(state.xigrid.nodes), dtype=float)
        return float(state.xigrid.weights @ (a * state.xi_marginal()))
    raise ShapeMismatch(f"unsupported state type {type(state).__name__}")


def trace_with(rho: DensityOperator, op: np.ndarray) -> complex:
    """Tr(rho M) in the state's matrix convention."""
    op = np.asarray(op)
    if op.shape != rho.matrix.shape:
        raise ShapeMismatch("operator shape does not match the density matrix")
    return complex(np.trace(rho.matrix @ op))
