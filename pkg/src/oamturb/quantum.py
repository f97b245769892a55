"""Qubit-subspace projection, ensemble density matrices and concurrence.

Two-qubit states use the basis ``|q,q>, |q,-q>, |-q,q>, |-q,-q>`` with
photon A as the first factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateEnsembleError, DimensionError, ValidationError
from .grid import SampledField, inner_product

BASIS_LABELS = ("q,q", "q,-q", "-q,q", "-q,-q")
SQRT_HALF = np.sqrt(0.5)
SIGMA_Y = np.array([[0, -1j], [1j, 0]])
SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)


@dataclass(frozen=True)
class ModalCoefficients:
    """Overlaps of one arm's distorted inputs with the ``+q`` / ``-q`` outputs.

    For arm A these are ``a_q, a_qbar, b_q, b_qbar``; for arm B ``c_q,
    c_qbar, d_q, d_qbar``. ``plus_to_minus`` is ``<-q| U |+q>``.
    """

    plus_to_plus: complex
    plus_to_minus: complex
    minus_to_plus: complex
    minus_to_minus: complex

    def __post_init__(self):
        for name in ("plus_to_plus", "plus_to_minus", "minus_to_plus", "minus_to_minus"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        # A passive channel cannot put more than the input power into two modes.
        if max(self.retained_power()) > 1 + 1e-6:
            raise ValidationError(f"retained power {max(self.retained_power()):.6g} exceeds 1")

    @classmethod
    def identity(cls) -> ModalCoefficients:
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j)

    @classmethod
    def from_matrix(cls, u) -> ModalCoefficients:
        """Build from a 2x2 transfer matrix ``u[out, in]`` with order ``(+q, -q)``."""
        u = np.asarray(u, dtype=complex)
        return cls(u[0, 0], u[1, 0], u[0, 1], u[1, 1])

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.plus_to_plus, self.minus_to_plus], [self.plus_to_minus, self.minus_to_minus]],
            dtype=complex,
        )

    def retained_power(self):
        """``(|U q|^2, |U qbar|^2)`` inside the qubit subspace."""
        return (
            abs(self.plus_to_plus) ** 2 + abs(self.plus_to_minus) ** 2,
            abs(self.minus_to_plus) ** 2 + abs(self.minus_to_minus) ** 2,
        )


def modal_coefficients(
    distorted_plus: SampledField,
    distorted_minus: SampledField,
    basis: tuple[SampledField, SampledField],
) -> ModalCoefficients:
    """Project the two distorted inputs of one arm onto ``basis = (plus, minus)``."""
    plus, minus = basis
    for f in (distorted_plus, distorted_minus, minus):
        if f.grid != plus.grid:
            raise DimensionError("all fields must share one grid")
        if not np.isclose(f.z, plus.z, rtol=1e-12, atol=1e-12):
            raise DimensionError(f"fields at z={f.z} and z={plus.z} are not in one plane")
    return ModalCoefficients(
        inner_product(plus, distorted_plus),
        inner_product(minus, distorted_plus),
        inner_product(plus, distorted_minus),
        inner_product(minus, distorted_minus),
    )


@dataclass(frozen=True, eq=False)
class ProjectedPureState:
    """Unnormalized amplitudes ``C1..C4`` of the state kept in the qubit subspace."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(4)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


BELL_STATE = ProjectedPureState([0, SQRT_HALF, SQRT_HALF, 0])


def project_two_photon(arm_a: ModalCoefficients, arm_b: ModalCoefficients) -> ProjectedPureState:
    """Amplitudes of ``(U_A x U_B)(|q,-q> + |-q,q>)/sqrt 2`` restricted to the qubits."""
    a_q, a_qb = arm_a.plus_to_plus, arm_a.plus_to_minus
    b_q, b_qb = arm_a.minus_to_plus, arm_a.minus_to_minus
    c_q, c_qb = arm_b.plus_to_plus, arm_b.plus_to_minus
    d_q, d_qb = arm_b.minus_to_plus, arm_b.minus_to_minus
    return ProjectedPureState(
        SQRT_HALF
        * np.array(
            [
                a_q * d_q + b_q * c_q,
                a_q * d_qb + b_q * c_qb,
                a_qb * d_q + b_qb * c_q,
                a_qb * d_qb + b_qb * c_qb,
            ]
        )
    )


def project_single_photon(arm_a: ModalCoefficients) -> ProjectedPureState:
    """Only photon A is distorted: ``C = (b_q, a_q, b_qbar, a_qbar) / sqrt 2``."""
    return ProjectedPureState(
        SQRT_HALF
        * np.array([arm_a.minus_to_plus, arm_a.plus_to_plus, arm_a.minus_to_minus, arm_a.plus_to_minus])
    )


def project_amplitudes(arm_a, arm_b=None) -> np.ndarray:
    """Vectorized projection on coefficient arrays with a trailing axis of 4.

    The trailing axis holds ``(plus_to_plus, plus_to_minus, minus_to_plus,
    minus_to_minus)``. With ``arm_b=None`` arm B is ideal.
    """
    a_q, a_qb, b_q, b_qb = np.moveaxis(np.asarray(arm_a), -1, 0)
    if arm_b is None:
        return SQRT_HALF * np.stack([b_q, a_q, b_qb, a_qb], axis=-1)
    c_q, c_qb, d_q, d_qb = np.moveaxis(np.asarray(arm_b), -1, 0)
    return SQRT_HALF * np.stack(
        [a_q * d_q + b_q * c_q, a_q * d_qb + b_q * c_qb, a_qb * d_q + b_qb * c_q, a_qb * d_qb + b_qb * c_qb],
        axis=-1,
    )


@dataclass(frozen=True, eq=False)
class TwoQubitDensityMatrix:
    """Hermitian, unit-trace, positive semidefinite 4x4 matrix."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise DimensionError(f"density matrix must be 4x4, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValidationError(f"trace is {np.trace(rho).real:.15g}, expected 1")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValidationError("density matrix has negative eigenvalues")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rho, dtype=dtype)

    def to_json(self) -> dict:
        """Row-major ``[re, im]`` pairs; see :func:`density_from_json`."""
        return {
            "basis": list(BASIS_LABELS),
            "rho": [[[float(z.real), float(z.imag)] for z in row] for row in self.rho],
        }


def density_from_json(doc, physical=True) -> TwoQubitDensityMatrix:
    """Parse a JSON density matrix.

    With ``physical=True`` the matrix is passed through :func:`project_to_physical`,
    which lets externally reconstructed matrices with small negative
    eigenvalues in.
    """
    rows = doc["rho"] if isinstance(doc, dict) else doc
    rho = np.array([[complex(re, im) for re, im in row] for row in rows])
    if physical:
        return project_to_physical(rho)
    return TwoQubitDensityMatrix(rho)


class DensityAccumulator:
    """Running unnormalized sum of ``|psi><psi|`` that merges associatively."""

    def __init__(self, total=None, count=0):
        self.total = np.zeros((4, 4), dtype=complex) if total is None else np.array(total, dtype=complex)
        self.count = count

    def add(self, state):
        amps = getattr(state, "amplitudes", state)
        amps = np.asarray(amps, dtype=complex).reshape(4)
        self.total += np.outer(amps, amps.conj())
        self.count += 1
        return self

    def add_many(self, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1, 4)
        self.total += np.einsum("ni,nj->ij", amps, amps.conj())
        self.count += len(amps)
        return self

    def merge(self, other: DensityAccumulator) -> DensityAccumulator:
        return DensityAccumulator(self.total + other.total, self.count + other.count)

    def result(self) -> TwoQubitDensityMatrix:
        trace = np.trace(self.total).real
        if self.count == 0 or trace <= 0:
            raise DegenerateEnsembleError("ensemble has no weight in the qubit subspace")
        rho = self.total / trace
        return TwoQubitDensityMatrix(0.5 * (rho + rho.conj().T))


def accumulate_density(states) -> TwoQubitDensityMatrix:
    """Trace-normalized sum of the projectors of ``states``."""
    acc = DensityAccumulator()
    for s in states:
        acc.add(s)
    return acc.result()


def _as_matrix(rho, tol):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"expected a 4x4 matrix, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValidationError("matrix is not Hermitian within tolerance")
    return 0.5 * (rho + rho.conj().T)


def _psd_sqrt(rho):
    """Square root of a PSD stack; eigenvalues at round-off level become 0.

    Without the cut, eigenvalues of order 1e-17 of a rank-deficient state
    contribute 3e-9 through the square root.
    """
    w, v = np.linalg.eigh(rho)
    floor = 1e-14 * np.max(np.abs(w), axis=-1, keepdims=True)
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _sqrt_r_eigenvalues(rho):
    """``sqrt(lambda_i)`` of ``R = rho (sy x sy) rho* (sy x sy)``, descending.

    They are the singular values of ``sqrt(rho) sqrt(rho_tilde)`` with
    ``rho_tilde = (sy x sy) rho* (sy x sy)``. Taking singular values avoids
    the square root of eigenvalues of ``R`` that sit at round-off level.
    """
    root = _psd_sqrt(rho)
    root_tilde = SIGMA_YY @ np.conj(root) @ SIGMA_YY
    return np.linalg.svd(root @ root_tilde, compute_uv=False)


def concurrence(rho) -> float:
    """Wootters concurrence ``max(0, s1 - s2 - s3 - s4)`` of a two-qubit state.

    ``s_i`` are the square roots of the eigenvalues of ``R`` in decreasing
    order; see :func:`_sqrt_r_eigenvalues` for how they are obtained.
    """
    s = _sqrt_r_eigenvalues(_as_matrix(rho, 1e-9))
    return float(min(1.0, max(0.0, s[0] - s[1] - s[2] - s[3])))


def concurrence_many(rhos) -> np.ndarray:
    """:func:`concurrence` over a stack of ``(..., 4, 4)`` matrices."""
    rhos = np.asarray(rhos, dtype=complex)
    rhos = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
    s = _sqrt_r_eigenvalues(rhos)
    return np.clip(s[..., 0] - s[..., 1] - s[..., 2] - s[..., 3], 0.0, 1.0)


def project_to_physical(rho_raw) -> TwoQubitDensityMatrix:
    """Clip negative eigenvalues to zero and renormalize the trace."""
    rho = _as_matrix(rho_raw, 1e-9)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise DegenerateEnsembleError("matrix has no positive eigenvalues")
    out = (v * (w / w.sum())) @ v.conj().T
    out = 0.5 * (out + out.conj().T)
    # Already-physical input is returned unchanged to rounding.
    if np.linalg.eigvalsh(rho).min() >= 0 and abs(np.trace(rho).real - 1) < 1e-12:
        out = rho
    return TwoQubitDensityMatrix(out)
