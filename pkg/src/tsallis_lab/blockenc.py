"""Block-encodings as explicit matrices.

A :class:`BlockEncoding` stores a compact ``core`` unitary acting on its
*active* ancilla qubits and the system register, ancillas most significant.
The remaining ``ancilla_qubits - active_ancillas`` ancillas are idle: the full
unitary is ``I_idle ⊗ core``.  Idle ancillas arise because the eigenvalue
transform is realized by a one-qubit dilation while the ancilla count follows
the usual ``a + 2`` bookkeeping; keeping them implicit lets products of
several transforms stay small enough to store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densityops import DensityOperator, as_matrix, dagger, hermitize, num_qubits
from .errors import ConstructionError, DimensionMismatchError, InvalidArgumentError
from .polyapprox import ApproxPolynomial, eval_poly_matrix

UNITARY_TOL = 1e-9
MAX_MATERIALIZED_DIM = 1 << 13


@dataclass(frozen=True, eq=False)
class PurifiedOracle:
    """Unitary on ``system ⊗ environment`` preparing a purification from ``|0…0⟩``."""

    unitary: np.ndarray = field(repr=False)
    n: int
    n_env: int

    @property
    def prepared_state(self) -> np.ndarray:
        return self.unitary[:, 0]

    def reduced_state(self) -> np.ndarray:
        psi = self.prepared_state.reshape(2 ** self.n, 2 ** self.n_env)
        return psi @ psi.conj().T


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """``(scale, ancilla_qubits, error_bound)``-block-encoding.

    ``core`` acts on ``active_ancillas + system_qubits`` qubits.
    """

    core: np.ndarray = field(repr=False)
    system_qubits: int
    ancilla_qubits: int
    active_ancillas: int
    scale: float = 1.0
    error_bound: float = 0.0
    target_ref: np.ndarray | None = field(default=None, repr=False)

    @property
    def system_dim(self) -> int:
        return 2 ** self.system_qubits

    @property
    def unitary(self) -> np.ndarray:
        """The full unitary ``I_idle ⊗ core``; refuses beyond 2^13 dimensions."""
        idle = 2 ** (self.ancilla_qubits - self.active_ancillas)
        dim = idle * self.core.shape[0]
        if dim > MAX_MATERIALIZED_DIM:
            raise InvalidArgumentError(f"refusing to materialize a {dim}-dimensional unitary")
        return np.kron(np.eye(idle), self.core)

    def unitarity_residual(self) -> float:
        u = self.core
        return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0]), 2))


def encoded_block(be: BlockEncoding) -> np.ndarray:
    """``⟨0|^a U |0⟩^a``, without the scale."""
    d = be.system_dim
    return be.core[:d, :d]


def verify(be: BlockEncoding, target) -> float:
    """``‖scale · encoded_block − target‖_∞``."""
    diff = be.scale * encoded_block(be) - as_matrix(target)
    return float(np.linalg.norm(diff, 2))


def _check_contract(be: BlockEncoding) -> BlockEncoding:
    res = be.unitarity_residual()
    if res > UNITARY_TOL:
        raise ConstructionError(f"block-encoding is not unitary (residual {res:.3e})")
    if be.target_ref is not None:
        dev = verify(be, be.target_ref)
        if dev > be.error_bound + 1e-9:
            raise ConstructionError(
                f"encoded block deviates by {dev:.3e} > stated error {be.error_bound:.3e}")
    return be


def _complete_unitary(v: np.ndarray) -> np.ndarray:
    """A unitary whose first column is the unit vector ``v`` (Householder)."""
    v = np.asarray(v, dtype=complex)
    dim = len(v)
    phase = v[0] / abs(v[0]) if abs(v[0]) > 1e-15 else 1.0
    w = v / phase  # w[0] is real and nonnegative
    e0 = np.zeros(dim, dtype=complex)
    e0[0] = 1.0
    u = e0 - w
    norm = np.linalg.norm(u)
    if norm < 1e-14:
        return phase * np.eye(dim, dtype=complex)
    u /= norm
    house = np.eye(dim, dtype=complex) - 2.0 * np.outer(u, u.conj())  # maps e0 to w
    return phase * house


def purified_oracle(rho: DensityOperator) -> PurifiedOracle:
    """``U|0⟩|0⟩ = Σ √λ_i |v_i⟩|i⟩`` with an environment as large as the system."""
    spec = rho.spectrum
    d = rho.dim
    lam = np.clip(spec.eigenvalues, 0.0, None)
    psi = (spec.eigenvectors * np.sqrt(lam)).reshape(d * d)  # Σ_i √λ_i v_i ⊗ e_i
    psi /= np.linalg.norm(psi)
    return PurifiedOracle(unitary=_complete_unitary(psi), n=rho.n_qubits, n_env=rho.n_qubits)


def _swap_outer(d_a: int, d_mid: int) -> np.ndarray:
    """Permutation swapping registers A and B in ``A ⊗ mid ⊗ B`` with ``dim A = dim B``."""
    dim = d_a * d_mid * d_a
    idx = np.arange(dim).reshape(d_a, d_mid, d_a)
    perm = idx.transpose(2, 1, 0).reshape(dim)
    p = np.zeros((dim, dim))
    p[np.arange(dim), perm] = 1.0
    return p


def density_block_encoding(oracle: PurifiedOracle) -> BlockEncoding:
    """``(1, n + n_env, 0)``-block-encoding of the purified state.

    Register order is ``(A, env, B)``: ``(A, env)`` are the ancillas and ``B``
    is the system.  The circuit is ``(O† ⊗ I)(SWAP_{A,B})(O ⊗ I)``.
    """
    d = 2 ** oracle.n
    d_env = 2 ** oracle.n_env
    o = np.kron(oracle.unitary, np.eye(d))
    core = dagger(o) @ _swap_outer(d, d_env) @ o
    rho = oracle.reduced_state()
    be = BlockEncoding(core=core, system_qubits=oracle.n, ancilla_qubits=oracle.n + oracle.n_env,
                       active_ancillas=oracle.n + oracle.n_env, scale=1.0, error_bound=0.0,
                       target_ref=rho)
    res = verify(be, rho)
    if res > 1e-6:
        raise ConstructionError(f"density block-encoding residual {res:.3e}")
    return be


def exact_block_encoding(a, scale: float = 1.0) -> BlockEncoding:
    """One-ancilla dilation of a Hermitian ``A`` with ``‖A‖ ≤ scale``."""
    a = as_matrix(a)
    n = num_qubits(a.shape[0])
    core = _dilate(hermitize(a) / scale)
    return _check_contract(BlockEncoding(core=core, system_qubits=n, ancilla_qubits=1,
                                         active_ancillas=1, scale=scale, target_ref=a))


def _dilate(p: np.ndarray) -> np.ndarray:
    """``[[P, K], [K, −P]]`` with ``K = sqrt(I − P²)`` for Hermitian ``‖P‖ ≤ 1``."""
    w, v = np.linalg.eigh(p)
    k = (v * np.sqrt(np.clip(1.0 - w * w, 0.0, None))) @ dagger(v)
    return np.block([[p, k], [k, -p]])


def random_hermitian_perturbation(dim: int, norm: float, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with operator norm exactly ``norm``."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = hermitize(g)
    return h * (norm / np.linalg.norm(h, 2))


def eigen_transform(be: BlockEncoding, p: ApproxPolynomial, delta_p: float = 0.0,
                    rng: np.random.Generator | None = None) -> BlockEncoding:
    """Block-encoding of ``p(Â)`` for the encoded block ``Â`` of ``be``.

    ``p`` must satisfy ``|p| ≤ 1/2`` on ``[−1, 1]``.  The result carries
    ``a + 2`` ancillas (one active) and error bound
    ``4·deg·√(ε/α) + δ′``.  With ``rng`` given, a Hermitian perturbation of
    norm ``δ′`` is added to ``p(Â)`` before dilation so the stated error is
    actually incurred.
    """
    if not p.certified_bound <= 0.5 + 1e-9:
        raise InvalidArgumentError(f"eigen_transform needs |p| <= 1/2, got {p.certified_bound:.6g}")
    err = 4.0 * p.degree * np.sqrt(be.error_bound / be.scale) + delta_p
    if err >= 1.0:
        raise InvalidArgumentError(f"error budget {err:.3g} is not below 1")
    block = encoded_block(be)
    herm_err = np.max(np.abs(block - dagger(block)), initial=0.0)
    if herm_err > 1e-8:
        raise InvalidArgumentError(f"encoded block is not Hermitian ({herm_err:.3e})")
    pa = eval_poly_matrix(p, hermitize(block))
    if rng is not None and delta_p > 0:
        pa = pa + random_hermitian_perturbation(be.system_dim, delta_p, rng)
    target = None
    if be.target_ref is not None:
        target = eval_poly_matrix(p, hermitize(be.target_ref) / be.scale)
    return _check_contract(BlockEncoding(
        core=_dilate(pa), system_qubits=be.system_qubits, ancilla_qubits=be.ancilla_qubits + 2,
        active_ancillas=1, scale=1.0, error_bound=float(err), target_ref=target))


def _act_on_outer(v: np.ndarray, d_v: int, d_mid: int, d_sys: int) -> np.ndarray:
    """``V`` on ``(v-ancillas, system)`` lifted to ``v-ancillas ⊗ mid ⊗ system``."""
    v4 = v.reshape(d_v, d_sys, d_v, d_sys)
    full = np.einsum("isjt,mn->imsjnt", v4, np.eye(d_mid))
    dim = d_v * d_mid * d_sys
    return full.reshape(dim, dim)


def block_product(u: BlockEncoding, v: BlockEncoding) -> BlockEncoding:
    """``(αβ, a + b, αδ + βε)``-block-encoding of ``A·B`` from ``u`` of ``A`` and ``v`` of ``B``.

    Active register order is ``(v-ancillas, u-ancillas, system)``; ``U`` is
    applied after ``V``.
    """
    if u.system_qubits != v.system_qubits:
        raise DimensionMismatchError(
            f"system qubits differ: {u.system_qubits} vs {v.system_qubits}")
    d_sys = u.system_dim
    d_u = 2 ** u.active_ancillas
    d_v = 2 ** v.active_ancillas
    lifted_u = np.kron(np.eye(d_v), u.core)
    lifted_v = _act_on_outer(v.core, d_v, d_u, d_sys)
    target = None
    if u.target_ref is not None and v.target_ref is not None:
        target = as_matrix(u.target_ref) @ as_matrix(v.target_ref)
    return _check_contract(BlockEncoding(
        core=lifted_u @ lifted_v, system_qubits=u.system_qubits,
        ancilla_qubits=u.ancilla_qubits + v.ancilla_qubits,
        active_ancillas=u.active_ancillas + v.active_ancillas,
        scale=u.scale * v.scale, error_bound=u.scale * v.error_bound + v.scale * u.error_bound,
        target_ref=target))


def with_injected_error(be: BlockEncoding, eps: float, rng: np.random.Generator) -> BlockEncoding:
    """Copy of ``be`` whose block is off by a Hermitian perturbation of norm ``eps``.

    Requires ``‖block‖ + eps/scale ≤ 1``; the stated error grows by ``eps``.
    """
    block = encoded_block(be)
    pert = random_hermitian_perturbation(be.system_dim, eps / be.scale, rng)
    new = hermitize(block) + pert
    if np.linalg.norm(new, 2) > 1.0:
        raise InvalidArgumentError("perturbed block leaves the unit ball")
    return _check_contract(BlockEncoding(
        core=_dilate(new), system_qubits=be.system_qubits, ancilla_qubits=be.ancilla_qubits,
        active_ancillas=1, scale=be.scale, error_bound=be.error_bound + eps,
        target_ref=be.target_ref))


__all__ = [
    "BlockEncoding", "PurifiedOracle", "purified_oracle", "density_block_encoding",
    "exact_block_encoding", "eigen_transform", "block_product", "encoded_block", "verify",
    "with_injected_error", "random_hermitian_perturbation",
]
