"""Operator algebra on the composite (ion 1, ion 2, mode) Hilbert space.

Conventions used everywhere in the package:

* Tensor factor order is ``(ion 1, ion 2, mode)``; a basis index is
  ``(s1 * 2 + s2) * n_max + n``.
* Each ion uses the basis ``(|g>, |e>)``, so ``sigma_z = diag(-1, +1)`` and
  ``sigma_plus = |e><g|``.
* The mode factor is a truncated Fock basis of ``n_max`` levels. A space may
  carry a *basis squeeze* ``(basis_r, basis_theta)``; its basis vectors are then
  ``S(basis_r, basis_theta)|n>`` instead of ``|n>``. Physical operators (the lab
  annihilation operator ``a`` and everything built from it) are always
  expressed in whatever basis the space uses, so a state computed in a squeezed
  basis describes the same physics as one computed in the bare basis.

Operators are ``scipy.sparse`` CSR matrices; density matrices are dense
``numpy`` arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

SPIN_DIM = 2
GROUND, EXCITED = 0, 1


class TruncationWarning(UserWarning):
    """Raised when a Fock cutoff is too small for the requested operation."""


@dataclass(frozen=True)
class FockCutoff:
    """Retained Fock levels plus the extra levels used when building unitaries."""

    n_max: int
    margin: int | None = None

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 4:
            raise ValueError(f"n_max must be an integer >= 4, got {self.n_max}")
        if self.margin is not None and self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")

    @property
    def extra(self) -> int:
        return self.n_max // 2 if self.margin is None else int(self.margin)


@dataclass(frozen=True)
class HilbertSpace:
    """Two spins and one truncated bosonic mode.

    ``basis_r``/``basis_theta`` select the squeezed Fock basis described in the
    module docstring; ``basis_r = 0`` is the ordinary number basis.
    """

    n_max: int
    margin: int | None = None
    basis_r: float = 0.0
    basis_theta: float = 0.0

    def __post_init__(self):
        FockCutoff(self.n_max, self.margin)  # validates
        if self.basis_r < 0:
            raise ValueError("basis_r must be >= 0 (use basis_theta + pi to flip the axis)")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (SPIN_DIM, SPIN_DIM, self.n_max)

    @property
    def dim(self) -> int:
        return SPIN_DIM * SPIN_DIM * self.n_max

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.n_max, self.margin)

    @property
    def is_bare(self) -> bool:
        return self.basis_r == 0.0

    def with_n_max(self, n_max: int) -> "HilbertSpace":
        return HilbertSpace(n_max, self.margin, self.basis_r, self.basis_theta)

    def index(self, s1: int, s2: int, n: int) -> int:
        return (s1 * SPIN_DIM + s2) * self.n_max + n

    def labels(self) -> dict[str, np.ndarray]:
        """Per-basis-state quantum numbers ``e1``, ``e2`` (0/1) and ``n``."""
        e1, e2, n = np.meshgrid(
            np.arange(2), np.arange(2), np.arange(self.n_max), indexing="ij"
        )
        return {"e1": e1.ravel(), "e2": e2.ravel(), "n": n.ravel()}


def ladder(n: int) -> sp.csr_matrix:
    """Truncated annihilation matrix on ``n`` Fock levels (``a|0> = 0``)."""
    return sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, format="csr", dtype=complex)


def mode_annihilation(space: HilbertSpace) -> sp.csr_matrix:
    """Lab-frame ``a`` on the mode factor alone, in the space's mode basis.

    In the basis ``S|n>`` the matrix of ``a`` is that of
    ``S^dag a S = cosh(r) a - e^{i theta} sinh(r) a^dag``.
    """
    A = ladder(space.n_max)
    if space.is_bare:
        return A
    c, s = np.cosh(space.basis_r), np.sinh(space.basis_r)
    return (c * A - np.exp(1j * space.basis_theta) * s * A.getH()).tocsr()


def embed(op, factor: int, space: HilbertSpace) -> sp.csr_matrix:
    """Place a single-factor operator at ``factor`` (0, 1: ions; 2: mode)."""
    mats = [sp.identity(d, dtype=complex, format="csr") for d in space.dims]
    mats[factor] = sp.csr_matrix(op, dtype=complex)
    return sp.kron(sp.kron(mats[0], mats[1]), mats[2], format="csr")


def identity(space: HilbertSpace) -> sp.csr_matrix:
    return sp.identity(space.dim, dtype=complex, format="csr")


def annihilation_op(space: HilbertSpace) -> sp.csr_matrix:
    """``a`` embedded on the mode factor.

    The truncated matrix has ``a^dag|n_max-1> = 0``, so ``[a, a^dag]`` equals the
    identity everywhere except on the top Fock level, where it is ``1 - n_max``.
    """
    return embed(mode_annihilation(space), 2, space)


def creation_op(space: HilbertSpace) -> sp.csr_matrix:
    return annihilation_op(space).getH().tocsr()


def number_op(space: HilbertSpace) -> sp.csr_matrix:
    a = annihilation_op(space)
    return (a.getH() @ a).tocsr()


_SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)


def spin_ops(space: HilbertSpace, ion: int):
    """Return ``(sigma_plus, sigma_minus, sigma_z)`` for ion 1 or 2."""
    if ion not in (1, 2):
        raise ValueError(f"ion must be 1 or 2, got {ion!r}")
    splus = embed(_SIGMA_PLUS, ion - 1, space)
    sminus = splus.getH().tocsr()
    sz = (splus @ sminus - sminus @ splus).tocsr()
    return splus, sminus, sz


def parity_op(space: HilbertSpace) -> sp.csr_matrix:
    """``(-1)^n`` on the mode factor (basis-index parity)."""
    return embed(sp.diags((-1.0) ** np.arange(space.n_max)), 2, space)


@lru_cache(maxsize=64)
def _squeeze_matrix_cached(r: float, theta: float, n: int, margin: int) -> np.ndarray:
    big = n + margin
    A = ladder(big).toarray()
    gen = 0.5 * r * (np.exp(-1j * theta) * A @ A - np.exp(1j * theta) * A.T @ A.T)
    return scipy.linalg.expm(gen)[:n, :n]


def squeeze_matrix(r: float, theta: float, n: int, margin: int | None = None) -> np.ndarray:
    """Mode-only ``S(r, theta) = exp[r/2 (e^{-i theta} a^2 - e^{i theta} a^dag^2)]``.

    Built at ``n + margin`` levels and projected back onto the first ``n``.
    Warns when the projection is not unitary on :func:`squeeze_interior`.
    The result is read-only (it is cached).
    """
    if r < 0:
        raise ValueError("squeeze amplitude r must be >= 0")
    margin = n // 2 if margin is None else margin
    S = _squeeze_matrix_cached(float(r), float(theta), int(n), int(margin))
    S.setflags(write=False)
    defect = interior_unitarity_defect(S, squeeze_interior(r, n))
    if defect > 1e-6:
        warnings.warn(
            f"squeeze r={r} not resolved at n_max={n}, margin={margin} "
            f"(interior unitarity defect {defect:.1e})",
            TruncationWarning,
            stacklevel=2,
        )
    return S


def squeeze_interior(r: float, n: int) -> int:
    """Levels ``k < n e^{-2r} / 4`` whose squeezed images fit inside ``n`` levels.

    ``S|k>`` has mean occupation ``k cosh 2r + sinh^2 r`` and a heavy number
    tail, so a projected squeeze matrix can only be unitary on a small interior.
    """
    return max(1, int(n * np.exp(-2 * r) / 4))


def squeeze_op(r: float, theta: float, space: HilbertSpace) -> sp.csr_matrix:
    """Squeeze unitary embedded on the mode factor (bare-basis matrix elements)."""
    return embed(squeeze_matrix(r, theta, space.n_max, space.cutoff.extra), 2, space)


def displacement_matrix(alpha: complex, n: int, margin: int | None = None) -> np.ndarray:
    """Mode-only ``D(alpha) = exp(alpha a^dag - alpha* a)`` with margin-and-project.

    Accurate for ``|alpha|**2`` well below ``n``; warns past ``n / 4``.
    """
    if abs(alpha) ** 2 > n / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds n_max/4 = {n / 4:.3g}",
            TruncationWarning,
            stacklevel=2,
        )
    margin = n // 2 if margin is None else margin
    A = ladder(n + margin).toarray()
    gen = alpha * A.T - np.conj(alpha) * A
    return scipy.linalg.expm(gen)[:n, :n]


def displacement_interior(alpha: complex, n: int) -> int:
    """Levels ``k < (sqrt(n) - |alpha| - 1)^2 / 2`` that ``D(alpha)`` keeps inside ``n`` levels."""
    reach = np.sqrt(n) - abs(alpha) - 1
    return max(1, int(reach**2 / 2)) if reach > 0 else 1


def displacement_op(alpha: complex, space: HilbertSpace) -> sp.csr_matrix:
    return embed(displacement_matrix(alpha, space.n_max, space.cutoff.extra), 2, space)


def interior_unitarity_defect(U: np.ndarray, n_interior: int | None = None) -> float:
    """Max elementwise deviation of ``U^dag U`` from identity on ``n < n_interior``."""
    U = np.asarray(U.toarray() if sp.issparse(U) else U)
    k = U.shape[0] // 2 if n_interior is None else n_interior
    prod = (U.conj().T @ U)[:k, :k]
    return float(np.max(np.abs(prod - np.eye(k))))


def commutator(A, B):
    return A @ B - B @ A


def is_hermitian(M, tol: float = 1e-12) -> bool:
    diff = M - M.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or float(abs(diff).max()) < tol
    return float(np.max(np.abs(diff))) < tol


def expectation(op, rho: np.ndarray) -> complex:
    """``Tr[op rho]``."""
    if op.shape != rho.shape:
        raise ValueError(f"dimension mismatch: operator {op.shape} vs state {rho.shape}")
    if sp.issparse(op):
        return complex(op.multiply(rho.T).sum())
    return complex(np.einsum("ij,ji->", op, rho))


# -- states ---------------------------------------------------------------


def basis_ket(space: HilbertSpace, e1: int, e2: int, n: int) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(e1, e2, n)] = 1.0
    return psi


def pure_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def product_state(space: HilbertSpace, e1: int, e2: int, mode_rho: np.ndarray) -> np.ndarray:
    """``|e1,e2><e1,e2|`` tensored with a mode density matrix (in the space's basis)."""
    spin = np.zeros((4, 4))
    k = e1 * 2 + e2
    spin[k, k] = 1.0
    return np.kron(spin, np.asarray(mode_rho, dtype=complex))


def check_density_matrix(rho: np.ndarray, tol: float = 1e-9, eig_tol: float = 1e-7) -> None:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and (nearly) PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"trace {tr} differs from 1")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"not Hermitian (max |rho - rho^dag| = {herm:.2e})")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -eig_tol:
        raise ValueError(f"negative eigenvalue {lam:.2e}")


def reduced_mode(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Partial trace over both spins."""
    n = space.n_max
    return np.einsum("kikj->ij", np.asarray(rho).reshape(4, n, 4, n))


def reduced_spins(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    n = space.n_max
    return np.einsum("ikjk->ij", np.asarray(rho).reshape(4, n, 4, n))


def mode_populations(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    return np.real(np.diag(reduced_mode(rho, space)))


def to_bare_fock(mode_rho: np.ndarray, space: HilbertSpace, n_out: int | None = None) -> np.ndarray:
    """Express a mode density matrix from ``space``'s basis in the bare Fock basis.

    ``rho_bare = S rho S^dag`` with ``S = S(basis_r, basis_theta)`` evaluated on
    ``n_out`` levels (default: large enough for the squeezed tails).
    """
    mode_rho = np.asarray(mode_rho, dtype=complex)
    n = mode_rho.shape[0]
    if space.is_bare:
        if n_out is None or n_out == n:
            return mode_rho.copy()
        out = np.zeros((n_out, n_out), dtype=complex)
        k = min(n, n_out)
        out[:k, :k] = mode_rho[:k, :k]
        return out
    if n_out is not None:
        return _squeeze_to_bare(mode_rho, space, n_out)
    # grow the bare cutoff until the squeezed tails are captured
    n_out = int(np.ceil(n * np.exp(2 * space.basis_r))) + 16
    while True:
        out = _squeeze_to_bare(mode_rho, space, n_out)
        tail = float(np.abs(np.diag(out))[-8:].sum())
        if tail < 1e-13 or n_out > 4 * n * np.exp(2 * space.basis_r) + 64:
            return out
        n_out = int(1.5 * n_out)


def _squeeze_to_bare(mode_rho, space, n_out):
    n = mode_rho.shape[0]
    big = max(n_out, n)
    S = squeeze_matrix(space.basis_r, space.basis_theta, big, margin=big // 2 + 16)
    padded = np.zeros((big, big), dtype=complex)
    padded[:n, :n] = mode_rho
    return (S @ padded @ S.conj().T)[:n_out, :n_out]
