"""Observables, probe specifications and coupling parameters.

Quantum observables carry their spectral data (eigenvalues plus orthogonal
projectors); classical observables carry A(q, p) with its partial derivatives,
which drive the Liouville generator. The probe is a zero-mean Gaussian in both
position and momentum, and the effective measurement strength is
tau = (epsilon * sigma_P)^2 / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    InvariantViolation,
    NonHermitianObservable,
)

ArrayMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Quantum side
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralObservable:
    """Discrete spectral resolution: sorted eigenvalues with orthogonal projectors.

    ``basis`` columns are an orthonormal eigenbasis and ``block_index[k]`` maps
    column k to its eigenvalue index; both are derived from the projectors when
    not supplied. ``basis is None`` means the eigenbasis is the computational
    one (diagonal observable), which avoids materializing dense projectors for
    large grids.
    """

    eigenvalues: np.ndarray
    _projectors: tuple | None = None
    basis: np.ndarray | None = None
    block_index: np.ndarray | None = None

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)
        if np.any(np.diff(ev) <= 0):
            raise InvariantViolation("eigenvalues must be strictly ascending")
        if self._projectors is None and self.block_index is None:
            raise InvariantViolation("need projectors or an eigenbasis layout")
        if self.block_index is not None:
            bi = np.asarray(self.block_index, dtype=int)
            bi.flags.writeable = False
            object.__setattr__(self, "block_index", bi)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_projectors(cls, eigenvalues, projectors) -> "SpectralObservable":
        projs = tuple(np.asarray(p, dtype=complex) for p in projectors)
        if len(projs) != len(eigenvalues):
            raise DimensionMismatch("one projector per eigenvalue required")
        return cls(np.asarray(eigenvalues, dtype=float), _projectors=projs)

    @classmethod
    def from_hermitian(cls, matrix, degeneracy_tol: float = 1e-9) -> "SpectralObservable":
        """Spectral data of a Hermitian matrix, grouping near-equal eigenvalues."""
        m = np.asarray(matrix)
        if m.shape[0] != m.shape[1] or np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise NonHermitianObservable("matrix is not Hermitian within 1e-12")
        vals, vecs = np.linalg.eigh(m)
        groups: list[list[int]] = [[0]]
        for k in range(1, len(vals)):
            if vals[k] - vals[groups[-1][0]] <= degeneracy_tol:
                groups[-1].append(k)
            else:
                groups.append([k])
        eigenvalues = np.array([np.mean(vals[g]) for g in groups])
        block_index = np.empty(len(vals), dtype=int)
        for n, g in enumerate(groups):
            block_index[g] = n
        return cls(eigenvalues, basis=vecs, block_index=block_index)

    @classmethod
    def from_diagonal(cls, values) -> "SpectralObservable":
        """Observable already diagonal in the computational basis.

        Used for the continuous-spectrum case discretized on a position grid:
        each grid node is one eigenvalue. No dense projectors are stored.
        """
        v = np.asarray(values, dtype=float)
        if np.any(np.diff(v) <= 0):
            raise InvariantViolation("diagonal values must be strictly ascending")
        return cls(v, basis=None, block_index=np.arange(v.size))

    # -- derived layout ----------------------------------------------------

    @cached_property
    def _layout(self) -> tuple[np.ndarray | None, np.ndarray]:
        """(basis, block_index), derived from projectors when needed."""
        if self.block_index is not None:
            return self.basis, self.block_index
        cols = []
        blocks = []
        for n, p in enumerate(self._projectors):
            vals, vecs = np.linalg.eigh(p)
            keep = vals > 0.5
            cols.append(vecs[:, keep])
            blocks.extend([n] * int(np.sum(keep)))
        basis = np.hstack(cols)
        if basis.shape[0] != basis.shape[1]:
            raise InvariantViolation("projectors do not resolve the identity")
        return basis, np.asarray(blocks, dtype=int)

    @property
    def dim(self) -> int:
        if self._projectors is not None:
            return self._projectors[0].shape[0]
        return len(self.block_index)

    @property
    def n_eigenvalues(self) -> int:
        return len(self.eigenvalues)

    @property
    def projectors(self) -> list[np.ndarray]:
        if self._projectors is not None:
            return list(self._projectors)
        basis, blocks = self._layout
        out = []
        for n in range(self.n_eigenvalues):
            cols = np.flatnonzero(blocks == n)
            if basis is None:
                p = np.zeros((self.dim, self.dim), dtype=complex)
                p[cols, cols] = 1.0
            else:
                v = basis[:, cols]
                p = v @ v.conj().T
            out.append(p)
        return out

    def matrix(self) -> np.ndarray:
        """The observable as a dense Hermitian matrix."""
        basis, blocks = self._layout
        diag = self.eigenvalues[blocks]
        if basis is None:
            return np.diag(diag.astype(complex))
        return (basis * diag) @ basis.conj().T

    def to_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        basis, _ = self._layout
        if basis is None:
            return matrix
        return basis.conj().T @ matrix @ basis

    def from_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        basis, _ = self._layout
        if basis is None:
            return matrix
        return basis @ matrix @ basis.conj().T

    def min_gap(self) -> float:
        return float(np.min(np.diff(self.eigenvalues)))

    def validate(self, tol: float = 1e-10) -> None:
        projs = self.projectors
        total = sum(projs)
        if np.max(np.abs(total - np.eye(self.dim))) > tol:
            raise InvariantViolation("projectors do not sum to the identity")
        for m, pm in enumerate(projs):
            for n, pn in enumerate(projs):
                prod = pm @ pn
                ref = pn if m == n else 0.0
                if np.max(np.abs(prod - ref)) > tol:
                    raise InvariantViolation(f"projectors {m},{n} not orthogonal/idempotent")


# ---------------------------------------------------------------------------
# Classical side
# ---------------------------------------------------------------------------

KIND_POSITION = "position"
KIND_ACTION = "action"
KIND_GENERAL = "general"


@dataclass(frozen=True)
class ClassicalObservable:
    """A(q, p) with the partial derivatives that drive the Liouville generator.

    kind "position" is A = q exactly; kind "action" depends on (q, p) only
    through xi = (p^2 + q^2)/2 (bar coordinates) and also carries dA/dxi;
    kind "general" is anything else.
    """

    kind: str
    eval: ArrayMap
    dA_dq: ArrayMap
    dA_dp: ArrayMap
    A_of_xi: Callable[[np.ndarray], np.ndarray] | None = None
    dA_dxi: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in (KIND_POSITION, KIND_ACTION, KIND_GENERAL):
            raise InvariantViolation(f"unknown observable kind {self.kind!r}")
        if self.kind == KIND_ACTION and (self.A_of_xi is None or self.dA_dxi is None):
            raise InvariantViolation("action-kind observable needs A_of_xi and dA_dxi")


def position_observable() -> ClassicalObservable:
    """A(q, p) = q."""
    return ClassicalObservable(
        kind=KIND_POSITION,
        eval=lambda q, p: q + 0.0 * p,
        dA_dq=lambda q, p: np.ones_like(q + 0.0 * p),
        dA_dp=lambda q, p: np.zeros_like(q + 0.0 * p),
    )


def action_observable(A_of_xi, dA_dxi) -> ClassicalObservable:
    """A = A(xi) with xi = (q^2 + p^2)/2 in equal-unit (bar) coordinates."""

    def _xi(q, p):
        return 0.5 * (np.asarray(q) ** 2 + np.asarray(p) ** 2)

    return ClassicalObservable(
        kind=KIND_ACTION,
        eval=lambda q, p: A_of_xi(_xi(q, p)),
        dA_dq=lambda q, p: dA_dxi(_xi(q, p)) * q,
        dA_dp=lambda q, p: dA_dxi(_xi(q, p)) * p,
        A_of_xi=A_of_xi,
        dA_dxi=dA_dxi,
    )


def general_observable(eval, dA_dq, dA_dp) -> ClassicalObservable:
    return ClassicalObservable(kind=KIND_GENERAL, eval=eval, dA_dq=dA_dq, dA_dp=dA_dp)


# ---------------------------------------------------------------------------
# Probe and coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeSpec:
    """Zero-mean Gaussian probe: position width sigma_Q, momentum width sigma_P.

    Position and momentum are statistically independent; both means are fixed
    at zero.
    """

    sigma_Q: float
    sigma_P: float
    independent: bool = True

    def __post_init__(self):
        if not self.sigma_Q > 0:
            raise InvariantViolation("sigma_Q must be > 0")
        if self.sigma_P < 0:
            raise InvariantViolation("sigma_P must be >= 0")

    def position_density(self, Q) -> np.ndarray:
        q = np.asarray(Q, dtype=float)
        s2 = self.sigma_Q**2
        return np.exp(-0.5 * q * q / s2) / np.sqrt(2.0 * np.pi * s2)

    def momentum_density(self, P) -> np.ndarray:
        if self.sigma_P == 0.0:
            raise InvariantViolation("sigma_P = 0 probe has no momentum density")
        p = np.asarray(P, dtype=float)
        s2 = self.sigma_P**2
        return np.exp(-0.5 * p * p / s2) / np.sqrt(2.0 * np.pi * s2)

    def position_wavefunction(self, Q) -> np.ndarray:
        """Pure Gaussian whose |chi|^2 has standard deviation sigma_Q."""
        q = np.asarray(Q, dtype=float)
        s2 = self.sigma_Q**2
        return (2.0 * np.pi * s2) ** (-0.25) * np.exp(-0.25 * q * q / s2)


@dataclass(frozen=True)
class CouplingParams:
    """Coupling strength epsilon and the derived strength tau = (eps*sigma_P)^2/2.

    epsilon = 0 is admitted so the zero-coupling trivial limits are
    expressible; it forces tau = 0.
    """

    epsilon: float
    tau: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvariantViolation("epsilon must be >= 0")
        if self.tau < 0:
            raise InvariantViolation("tau must be >= 0")
        if self.epsilon == 0 and self.tau != 0:
            raise InvariantViolation("epsilon = 0 forces tau = 0")

    @classmethod
    def from_sigma_P(cls, epsilon: float, sigma_P: float) -> "CouplingParams":
        return cls(epsilon=epsilon, tau=0.5 * (epsilon * sigma_P) ** 2)

    @classmethod
    def from_probe(cls, epsilon: float, probe: ProbeSpec) -> "CouplingParams":
        return cls.from_sigma_P(epsilon, probe.sigma_P)

    @property
    def sigma_P(self) -> float:
        if self.epsilon == 0.0:
            return 0.0
        return np.sqrt(2.0 * self.tau) / self.epsilon


# ---------------------------------------------------------------------------
# Convex combinations and pure superpositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    """Two-component convex combination: weights p1, p2 >= 0 summing to 1."""

    p1: float
    p2: float
    components: tuple = field(default=())

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0:
            raise InvariantViolation("mixture weights must be non-negative")
        if abs(self.p1 + self.p2 - 1.0) > 1e-12:
            raise InvariantViolation("mixture weights must sum to 1 within 1e-12")
        if self.components and len(self.components) != 2:
            raise InvariantViolation("exactly two components expected")


@dataclass(frozen=True)
class PureSuperposition:
    """alpha*psi1 + beta*psi2 on a shared position grid (normalized on build)."""

    alpha: complex
    beta: complex
    psi1: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        if np.shape(self.psi1) != np.shape(self.psi2):
            raise DimensionMismatch("component wavefunctions must share a grid")
