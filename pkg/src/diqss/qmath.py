"""Small dense linear algebra for one to three qubits.

Amplitudes are stored big-endian over parties A, B, C with H=0 and V=1, so
index ``4*a + 2*b + c`` addresses ``|abc>``; ``|HHH>`` is index 0 and
``|VVV>`` index 7.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    algebraic: float = 1e-12
    spectral: float = 1e-10


TOL = Tolerances()

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# (first ket, second ket) of each GHZ branch, as computational-basis indices
_GHZ_KETS = {1: (0b000, 0b111), 2: (0b001, 0b110), 3: (0b010, 0b101), 4: (0b011, 0b100)}


@dataclass(frozen=True)
class ObservableXY:
    """A +/-1 valued qubit observable ``cos(angle) sx + sin(angle) sy``."""

    angle: float

    @property
    def matrix(self) -> np.ndarray:
        return observable_matrix(self)

    def projector(self, outcome: int) -> np.ndarray:
        """Projector onto the eigenspace with eigenvalue ``outcome`` (+1 or -1)."""
        if outcome not in (1, -1):
            raise ValueError(f"outcome must be +1 or -1, got {outcome!r}")
        return 0.5 * (IDENTITY + outcome * self.matrix)


def observable_matrix(o: ObservableXY | float) -> np.ndarray:
    angle = o.angle if isinstance(o, ObservableXY) else float(o)
    return np.cos(angle) * SIGMA_X + np.sin(angle) * SIGMA_Y


def ghz_state(index: int = 1, sign: str | int = "+") -> np.ndarray:
    """Return ``|GHZ_index^sign>`` as an 8-vector.

    Branch 1 is ``(|HHH> +/- |VVV>)/sqrt 2``, branch 2 ``(|HHV> +/- |VVH>)``,
    branch 3 ``(|HVH> +/- |VHV>)`` and branch 4 ``(|HVV> +/- |VHH>)``.
    """
    if index not in _GHZ_KETS:
        raise ValueError(f"GHZ index must be 1..4, got {index!r}")
    sgn = _parse_sign(sign)
    first, second = _GHZ_KETS[index]
    psi = np.zeros(8, dtype=complex)
    psi[first] = 1 / np.sqrt(2)
    psi[second] = sgn / np.sqrt(2)
    return psi


def _parse_sign(sign: str | int) -> int:
    if sign in ("+", 1, +1):
        return 1
    if sign in ("-", -1):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def tensor3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Kronecker product ``a (x) b (x) c`` in A, B, C order."""
    for m in (a, b, c):
        if np.shape(m) != (2, 2):
            raise ValueError(f"tensor3 expects 2x2 inputs, got shape {np.shape(m)}")
    return kron(a, b, c)


def kron(*mats: np.ndarray) -> np.ndarray:
    return reduce(np.kron, mats)


def is_normalized(psi: np.ndarray, atol: float = TOL.algebraic) -> bool:
    n = len(psi)
    if n not in (2, 4, 8):
        return False
    return abs(np.vdot(psi, psi).real - 1.0) <= atol


def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return ``rho`` unchanged.

    Raises
    ------
    ValueError
        If any of the three conditions fails at the module tolerances.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 4, 8):
        raise ValueError(f"density matrix must be 2^k x 2^k with k<=3, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > TOL.algebraic:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > TOL.algebraic:
        raise ValueError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -TOL.spectral:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def expectation(rho: np.ndarray, obs: np.ndarray, bounded: bool = True) -> float:
    """``Tr(rho obs)`` as a real number.

    With ``bounded`` (the default, for +/-1 valued observables) the result is
    clipped to [-1, 1] to absorb rounding.
    """
    rho = np.asarray(rho)
    obs = np.asarray(obs)
    if rho.shape != obs.shape or rho.ndim != 2:
        raise ValueError(f"shape mismatch: rho {rho.shape} vs observable {obs.shape}")
    value = np.trace(rho @ obs)
    if abs(value.imag) > TOL.spectral:
        raise ValueError(f"expectation value has imaginary part {value.imag:.3e}")
    value = float(value.real)
    if bounded:
        value = min(1.0, max(-1.0, value))
    return value


def partial_trace(rho: np.ndarray, keep: tuple[int, ...]) -> np.ndarray:
    """Reduce a three-qubit ``rho`` to the parties listed in ``keep`` (0=A, 1=B, 2=C)."""
    t = np.asarray(rho).reshape([2] * 6)
    letters = "abcdef"
    # row indices a,b,c ; column indices d,e,f ; traced parties share a letter
    cols = list(letters[3:])
    for party in range(3):
        if party not in keep:
            cols[party] = letters[party]
    out_rows = "".join(letters[p] for p in keep)
    out_cols = "".join(cols[p] for p in keep)
    expr = f"{letters[:3]}{''.join(cols)}->{out_rows}{out_cols}"
    d = 2 ** len(keep)
    return np.einsum(expr, t).reshape(d, d)
