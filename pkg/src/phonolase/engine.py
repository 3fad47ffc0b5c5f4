"""Lindblad superoperators, steady states, time evolution and two-time correlations.

Vectorisation is column stacking: ``vec(rho)[i + j*d] = rho[i, j]``, so
``vec(A rho B) = (B^T kron A) vec(rho)``.

When the Hamiltonian and collapse operators carry a conserved charge (a U(1)
excitation number or a Z2 parity, see :func:`detect_symmetry`) the Liouvillian
is block diagonal in ``q_i - q_j`` and every solve is done on the single block
that the requested quantity lives in. This is exact, not an approximation; it
just avoids factorising blocks that cannot contribute.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import fock
from .fock import FockCutoff, HilbertSpace, TruncationWarning

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
UNIQUENESS_TOL = 1e-8
PRUNE_RTOL = 1e-13


class EngineError(RuntimeError):
    pass


class SingularOrDegenerate(EngineError):
    """The steady state is not unique or the solve did not converge."""


class IntegrationError(EngineError):
    pass


class CutoffNotConverged(EngineError):
    pass


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(x: np.ndarray, d: int | None = None) -> np.ndarray:
    d = int(round(np.sqrt(x.size))) if d is None else d
    return np.asarray(x).reshape(d, d, order="F")


def prune(M, rtol: float = PRUNE_RTOL) -> sp.csr_matrix:
    """Drop entries below ``rtol * max|M|`` (rounding debris from basis changes)."""
    M = sp.csr_matrix(M, dtype=complex, copy=True)
    if M.nnz:
        M.data[np.abs(M.data) < rtol * np.abs(M.data).max()] = 0
        M.eliminate_zeros()
    return M


# -- symmetry -------------------------------------------------------------


@dataclass(frozen=True)
class Symmetry:
    """Conserved charge ``q`` (per basis state) with modulus (0 means U(1))."""

    name: str
    charges: np.ndarray
    modulus: int = 0

    def reduce(self, q):
        return np.mod(q, self.modulus) if self.modulus else q


def _charge_shift(op, sym: Symmetry):
    """Constant ``q_row - q_col`` of a sparse operator, or None if not homogeneous."""
    op = sp.coo_matrix(op)
    if op.nnz == 0:
        return 0
    dq = np.unique(sym.reduce(sym.charges[op.row] - sym.charges[op.col]))
    return int(dq[0]) if dq.size == 1 else None


def candidate_symmetries(space: HilbertSpace) -> list[Symmetry]:
    lab = space.labels()
    return [
        Symmetry("u1", lab["n"] - lab["e1"] + lab["e2"], 0),
        Symmetry("parity", np.mod(lab["n"] + lab["e1"] + lab["e2"], 2), 2),
    ]


def detect_symmetry(H, c_ops, space: HilbertSpace | None) -> Symmetry | None:
    """Strongest charge conserved by ``H`` and shifted uniformly by each ``c``."""
    if space is None:
        return None
    for sym in candidate_symmetries(space):
        if _charge_shift(H, sym) != 0:
            continue
        if all(_charge_shift(c, sym) is not None for c in c_ops):
            return sym
    return None


# -- superoperator --------------------------------------------------------


@dataclass
class Superoperator:
    """``d^2 x d^2`` Lindblad generator plus the operators it was built from."""

    H: sp.csr_matrix
    c_ops: list
    space: HilbertSpace | None = None
    labels: tuple[str, ...] = ()
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)
    _symmetry: object = field(default="unset", repr=False)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = _build_matrix(self.H, self.c_ops)
        return self._matrix

    @property
    def symmetry(self) -> Symmetry | None:
        if self._symmetry == "unset":
            self._symmetry = detect_symmetry(self.H, self.c_ops, self.space)
        return self._symmetry

    @property
    def h_eff(self) -> sp.csr_matrix:
        out = self.H.copy()
        for c in self.c_ops:
            out = out - 0.5j * (c.getH() @ c)
        return out.tocsr()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``L(rho)`` in matrix form (no d^2 matrix needed)."""
        heff = self.h_eff
        out = -1j * (heff @ rho) + 1j * (heff.getH().T @ rho.T).T
        for c in self.c_ops:
            out = out + c @ (c @ rho.conj().T).conj().T
        return out

    def trace_defect(self) -> float:
        """Max ``|vec(I)^T L|``; zero for a trace-preserving generator."""
        ident = vec(np.eye(self.d))
        return float(np.max(np.abs(self.matrix.T @ ident))) if self.d else 0.0

    def sector(self, offset: int = 0) -> np.ndarray:
        """Indices of ``vec`` entries with ``q_i - q_j = offset`` (all if no symmetry)."""
        sym = self.symmetry
        d = self.d
        if sym is None:
            return np.arange(d * d)
        q = sym.charges
        diff = sym.reduce(q[:, None] - q[None, :])  # [i, j]
        mask = diff == sym.reduce(offset)
        return np.flatnonzero(mask.reshape(-1, order="F"))

    def block(self, idx: np.ndarray) -> sp.csc_matrix:
        if idx.size == self.d**2:
            return self.matrix.tocsc()
        M = self.matrix.tocsr()[idx]
        return M.tocsc()[:, idx]


def _build_matrix(H, c_ops) -> sp.csr_matrix:
    d = H.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    for c in c_ops:
        cdc = (c.getH() @ c).tocsr()
        L = L + sp.kron(c.conj(), c) - 0.5 * sp.kron(eye, cdc) - 0.5 * sp.kron(cdc.T, eye)
    return sp.csr_matrix(L)


def liouvillian(H, c_ops=(), space: HilbertSpace | None = None, labels=()) -> Superoperator:
    """Lindblad generator ``-i[H, .] + sum_k D[c_k]``."""
    H = prune(H)
    d = H.shape[0]
    if H.shape != (d, d):
        raise ValueError(f"Hamiltonian must be square, got {H.shape}")
    cs = []
    for c in c_ops:
        if c.shape != (d, d):
            raise ValueError(f"collapse operator shape {c.shape} does not match H {H.shape}")
        cs.append(prune(c))
    if space is not None and space.dim != d:
        raise ValueError(f"space dimension {space.dim} does not match H {H.shape}")
    return Superoperator(H, cs, space, tuple(labels))


# -- steady state ---------------------------------------------------------


@dataclass
class SteadyState:
    rho: np.ndarray
    residual: float
    sigma_min: float
    sector_size: int
    symmetry: str | None
    wall_time: float
    space: HilbertSpace | None = None

    @property
    def n_max(self) -> int | None:
        return None if self.space is None else self.space.n_max


def _sigma_min_estimate(lu, n: int, iters: int = 6, seed: int = 0) -> float:
    """Smallest singular value of the factorised matrix by inverse power iteration."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = np.inf
    for _ in range(iters):
        y = lu.solve(x)
        z = lu.solve(y, trans="H")
        nz = np.linalg.norm(z)
        if not np.isfinite(nz) or nz == 0:
            return 0.0
        est = 1.0 / np.sqrt(nz)
        x = z / nz
    return float(est)


def _bordered(M: sp.spmatrix, row: int, cols: np.ndarray) -> sp.csr_matrix:
    """``M`` with row ``row`` replaced by ones at ``cols`` (the trace condition)."""
    M = sp.csr_matrix(M, copy=True)
    keep = np.ones(M.shape[0])
    keep[row] = 0.0
    M = sp.diags(keep) @ M
    trace_row = sp.csr_matrix((np.ones(cols.size), (np.full(cols.size, row), cols)), shape=M.shape)
    return (M + trace_row).tocsc()


def _finish(L: Superoperator, full: np.ndarray, sigma: float, size: int, t0: float, check: bool) -> SteadyState:
    d = L.d
    rho = unvec(full, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.linalg.norm(L.matrix @ vec(rho)))
    if check and sigma < UNIQUENESS_TOL:
        raise SingularOrDegenerate(
            f"steady state not unique (smallest singular value estimate {sigma:.2e})"
        )
    if residual > RESIDUAL_TOL:
        raise SingularOrDegenerate(f"steady-state residual {residual:.2e} exceeds {RESIDUAL_TOL:g}")
    sym = L.symmetry
    return SteadyState(
        rho=rho,
        residual=residual,
        sigma_min=sigma,
        sector_size=size,
        symmetry=None if sym is None else sym.name,
        wall_time=time.perf_counter() - t0,
        space=L.space,
    )


def _factor(M):
    try:
        return spla.splu(M, permc_spec="COLAMD")
    except RuntimeError as exc:  # exactly singular
        raise SingularOrDegenerate(f"steady-state system is singular: {exc}") from exc


def solve_steady(
    L: Superoperator,
    check_uniqueness: bool = True,
    reference: Superoperator | None = None,
) -> SteadyState:
    """Kernel of ``L`` with one row replaced by the trace condition.

    If ``L`` has a conserved charge only the ``q_i = q_j`` block is factorised.
    Otherwise, when a symmetric ``reference`` generator is supplied (typically
    the same model without its symmetry-breaking drive), GMRES is run on the full
    system preconditioned by the block LU factors of the reference; without a
    reference the full system is factorised directly.
    """
    t0 = time.perf_counter()
    d = L.d
    if L.symmetry is None and reference is not None and reference.symmetry is not None:
        return _solve_preconditioned(L, reference, check_uniqueness, t0)
    idx = L.sector(0)
    diag_local = np.searchsorted(idx, np.arange(d) * (d + 1))
    r0 = int(diag_local[0])
    M = _bordered(L.block(idx), r0, diag_local)
    rhs = np.zeros(idx.size, dtype=complex)
    rhs[r0] = 1.0
    lu = _factor(M)
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularOrDegenerate("steady-state solve produced non-finite values")
    full = np.zeros(d * d, dtype=complex)
    full[idx] = x
    sigma = _sigma_min_estimate(lu, idx.size) if check_uniqueness else np.nan
    return _finish(L, full, sigma, int(idx.size), t0, check_uniqueness)


def _solve_preconditioned(L, reference, check_uniqueness, t0, tol=1e-13, maxiter=60):
    d = L.d
    diag = np.arange(d) * (d + 1)
    r0 = int(diag[0])
    M = _bordered(L.matrix, r0, diag).tocsr()
    P = _bordered(reference.matrix, r0, diag).tocsr()
    q = reference.symmetry.charges
    labels = reference.symmetry.reduce(q[:, None] - q[None, :]).reshape(-1, order="F")
    blocks = []
    sigma = np.nan
    for off in np.unique(labels):
        idx = np.flatnonzero(labels == off)
        lu = _factor(P[idx].tocsc()[:, idx])
        if off == 0 and check_uniqueness:
            sigma = _sigma_min_estimate(lu, idx.size)
        blocks.append((idx, lu))

    def precondition(y):
        x = np.empty_like(y)
        for idx, lu in blocks:
            x[idx] = lu.solve(y[idx])
        return x

    pre = spla.LinearOperator(M.shape, matvec=precondition, dtype=complex)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[r0] = 1.0
    x, info = spla.gmres(M, rhs, x0=precondition(rhs), M=pre, rtol=tol, atol=0.0, restart=200, maxiter=maxiter)
    if info != 0:
        raise SingularOrDegenerate(f"preconditioned GMRES did not converge (info={info})")
    return _finish(L, x, sigma, d * d, t0, check_uniqueness)


def steady_state(L: Superoperator) -> np.ndarray:
    return solve_steady(L).rho


def tail_population(rho: np.ndarray, space: HilbertSpace, n_top: int = 5) -> float:
    return float(fock.mode_populations(rho, space)[-n_top:].sum())


def solve_adaptive(
    model,
    target_tail: float = 1e-6,
    start: int = 8,
    step: int = 8,
    cap: int = 256,
    n_max: int | None = None,
):
    """Steady state of a :class:`~phonolase.model.LaserModel` at an adequate cutoff.

    A fixed ``n_max`` skips the search. Returns ``(SteadyState, tail)``.
    """
    if not 0 < target_tail < 1:
        raise ValueError("target_tail must lie in (0, 1)")
    if n_max is not None:
        sizes = [n_max]
    else:
        sizes = list(range(start, cap + 1, step))
        if not sizes or sizes[-1] != cap:
            sizes.append(cap)  # the cap itself is always tried
    tail = np.inf
    for n in sizes:
        space = model.space(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            L = model.liouvillian(space)
            ref = model.reference_liouvillian(space) if L.symmetry is None else None
        ss = solve_steady(L, reference=ref)
        tail = tail_population(ss.rho, space)
        log.debug("n_max=%d tail=%.2e", n, tail)
        if tail < target_tail or n_max is not None:
            return ss, tail
    raise CutoffNotConverged(
        f"top-level population {tail:.2e} still above {target_tail:g} at the cap n_max={cap}"
    )


def choose_cutoff(model, target_tail: float = 1e-6, start: int = 8, step: int = 8, cap: int = 256) -> FockCutoff:
    """Smallest ``n_max`` (from ``start`` in steps of ``step``) meeting the tail bound."""
    ss, _ = solve_adaptive(model, target_tail, start, step, cap)
    return FockCutoff(ss.space.n_max)


# -- time evolution -------------------------------------------------------


def propagate(
    rho0: np.ndarray,
    L: Superoperator,
    t,
    method: str = "DOP853",
    rtol: float = 1e-10,
    atol: float = 1e-12,
):
    """``rho(t)`` for a scalar ``t`` (returns a matrix) or an array (returns a stack).

    ``method`` is an explicit Runge-Kutta scheme for :func:`solve_ivp` or
    ``"krylov"`` for :func:`scipy.sparse.linalg.expm_multiply`. The default
    step tolerance 1e-10 keeps the accumulated error below 1e-8 over
    relaxation times; 1e-8 per step drifts to a few 1e-8.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("propagation times must be >= 0")
    if np.any(np.diff(ts) < 0):
        raise ValueError("propagation times must be non-decreasing")
    d = L.d
    if method == "krylov":
        out = np.stack([unvec(spla.expm_multiply(L.matrix * tk, vec(rho0)), d) for tk in ts])
    else:
        out = _integrate(lambda_rhs(L), rho0, ts, method, rtol, atol)
    return out[0] if scalar else out


def lambda_rhs(L: Superoperator):
    heff = L.h_eff
    heff_h = heff.getH().tocsr()
    cs = [(c.tocsr(), c.getH().tocsr()) for c in L.c_ops]

    def rhs(rho):
        out = -1j * (heff @ rho) + 1j * (heff_h.T @ rho.T).T
        for c, ch in cs:
            out += (c @ (ch.T @ rho.T).T)
        return out

    return rhs


def _integrate(rhs, rho0, ts, method, rtol, atol):
    d = rho0.shape[0]
    if ts[-1] == 0:
        return np.repeat(rho0[None], ts.size, axis=0)

    def f(_, y):
        return rhs(y.reshape(d, d)).ravel()

    sol = solve_ivp(f, (0.0, ts[-1]), rho0.ravel(), method=method, t_eval=ts, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    out = sol.y.T.reshape(ts.size, d, d)
    out[ts == 0] = rho0
    return out


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(0.5 * ((rho1 - rho2) + (rho1 - rho2).conj().T))
    return 0.5 * float(np.abs(ev).sum())


# -- correlations ---------------------------------------------------------


@dataclass(frozen=True)
class CorrelationSeries:
    tau: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau)
        if tau[0] != 0 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must start at 0 and increase strictly")


def split_by_charge(op, sym: Symmetry | None) -> dict[int, sp.csr_matrix]:
    """Decompose ``op`` into parts with definite charge shift ``q_row - q_col``."""
    op = sp.coo_matrix(op)
    if sym is None:
        return {0: op.tocsr()}
    shift = sym.reduce(sym.charges[op.row] - sym.charges[op.col])
    parts = {}
    for dq in np.unique(shift):
        m = shift == dq
        parts[int(dq)] = sp.csr_matrix((op.data[m], (op.row[m], op.col[m])), shape=op.shape)
    return parts


def _evolve(M, x0, tau):
    steps = np.diff(tau)
    if tau.size > 2 and np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        return spla.expm_multiply(M, x0, start=0.0, stop=tau[-1], num=tau.size, endpoint=True)
    X = np.empty((tau.size, x0.size), dtype=complex)
    x, prev = x0, 0.0
    for k, tk in enumerate(tau):
        if tk > prev:
            x = spla.expm_multiply(M * (tk - prev), x)
        X[k] = x
        prev = tk
    return X


def two_time_corr(A, B, rho_ss: np.ndarray, L: Superoperator, tau) -> CorrelationSeries:
    """``<A(tau) B(0)> = Tr[A exp(L tau)(B rho_ss)]`` via the quantum regression theorem.

    With a conserved charge, ``B`` is split into parts of definite charge shift;
    each ``B_k rho_ss`` lives in one block of ``L`` and only pairs with the part
    of ``A`` of opposite shift, so only those small blocks are propagated.
    Uniform grids are evaluated in one Krylov sweep per block.
    """
    tau = np.asarray(tau, dtype=float)
    if tau[0] != 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must start at 0 and increase strictly")
    sym = L.symmetry
    a_parts = split_by_charge(A, sym)
    values = np.zeros(tau.size, dtype=complex)
    for dq, Bk in split_by_charge(B, sym).items():
        Ak = a_parts.get(int(sym.reduce(-dq)) if sym is not None else 0)
        if Ak is None or Bk.nnz == 0:
            continue
        idx = L.sector(dq) if sym is not None else np.arange(L.d**2)
        x0 = vec(Bk @ rho_ss)[idx]
        # Tr[A X] = sum_ij A_ji X_ij = vec(A^T) . vec(X)
        w = vec(Ak.toarray().T)[idx]
        values += _evolve(L.block(idx).tocsr(), x0, tau) @ w
    return CorrelationSeries(tau, values)
