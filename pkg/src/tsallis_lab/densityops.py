"""Dense density-operator core and exact divergence oracles.

All matrices are plain ``numpy`` complex arrays.  Matrix functions go through
the Hermitian eigendecomposition, ``f(A) = U f(Λ) U†``.  Negative and zero
powers are pseudo-powers: eigenvalues at or below :data:`RANK_TOL` map to 0.
"""

from __future__ import annotations

import functools
import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError

RANK_TOL = 1e-9
HERM_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def num_qubits(dim: int) -> int:
    if not is_power_of_two(dim):
        raise InvalidArgumentError(f"dimension {dim} is not a power of two")
    return dim.bit_length() - 1


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition with eigenvalues sorted in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def spectrum(h: np.ndarray) -> Spectrum:
    w, v = np.linalg.eigh(hermitize(np.asarray(h, dtype=complex)))
    order = np.argsort(w)[::-1]
    return Spectrum(w[order], v[:, order])


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A validated density matrix on ``dim = 2**n`` levels.

    The spectrum is computed once on first access and cached.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"expected a square matrix, got shape {m.shape}")
        if not is_power_of_two(m.shape[0]):
            raise InvalidArgumentError(f"dimension {m.shape[0]} is not a power of two")
        herm_err = np.max(np.abs(m - m.conj().T))
        if herm_err > HERM_TOL:
            raise InvalidArgumentError(f"matrix is not Hermitian (max |M - M†| = {herm_err:.3e})")
        m = hermitize(m)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidArgumentError(f"trace is {tr!r}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        if self.spectrum.eigenvalues[-1] < -PSD_TOL:
            raise InvalidArgumentError(
                f"matrix is not PSD (min eigenvalue {self.spectrum.eigenvalues[-1]:.3e})")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_qubits(self) -> int:
        return num_qubits(self.dim)

    @functools.cached_property
    def spectrum(self) -> Spectrum:
        return spectrum(self.entries)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > RANK_TOL))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @classmethod
    def pure(cls, vector) -> "DensityOperator":
        v = np.asarray(vector, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def diagonal(cls, probs) -> "DensityOperator":
        return cls(np.diag(np.asarray(probs, dtype=complex)))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def basis(cls, dim: int, index: int) -> "DensityOperator":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls.pure(v)


def as_matrix(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.entries
    return np.asarray(x, dtype=complex)


def _check_same_dim(a, b):
    da, db = as_matrix(a).shape[0], as_matrix(b).shape[0]
    if da != db:
        raise DimensionMismatchError(f"dimension mismatch: {da} vs {db}")


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: QR of a complex Gaussian matrix with phase fix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_low_rank_state(dim: int, rank: int, seed) -> DensityOperator:
    """Random state of exact rank ``rank``.

    Eigenvectors are Haar distributed and the nonzero eigenvalues follow a flat
    Dirichlet law.  ``seed`` may be an integer or a ``numpy`` Generator.
    """
    if not is_power_of_two(dim):
        raise InvalidArgumentError(f"dimension {dim} is not a power of two")
    if not 1 <= rank <= dim:
        raise InvalidArgumentError(f"rank must lie in [1, {dim}], got {rank}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = haar_unitary(dim, rng)[:, :rank]
    while True:
        lam = rng.dirichlet(np.ones(rank))
        if np.all(lam > 1e3 * RANK_TOL):
            break
    rho = (u * lam) @ u.conj().T
    return DensityOperator(hermitize(rho))


def matrix_power(h, t: float) -> np.ndarray:
    """``H**t`` for PSD ``H`` through the spectrum.

    Eigenvalues at or below ``RANK_TOL`` count as kernel and map to 0 for every
    ``t``: for ``t <= 0`` this is the pseudo-power, and for small ``t > 0`` it
    stops eigensolver noise (``1e-16 ** 0.05 ≈ 0.16``) from leaking in.
    """
    s = h.spectrum if isinstance(h, DensityOperator) else spectrum(as_matrix(h))
    lam = s.eigenvalues
    support = lam > RANK_TOL
    mapped = np.zeros_like(lam)
    mapped[support] = np.power(lam[support], t)
    u = s.eigenvectors
    return (u * mapped) @ u.conj().T


def matrix_function(h, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    s = h.spectrum if isinstance(h, DensityOperator) else spectrum(as_matrix(h))
    u = s.eigenvectors
    return (u * f(s.eigenvalues)) @ u.conj().T


def support_projector(h) -> np.ndarray:
    return matrix_power(h, 0.0)


def affinity_exact(rho, sigma, alpha: float) -> float:
    """``tr(ρ^α σ^(1-α))``, clamped to ``[0, 1 + 1e-9]``."""
    _check_same_dim(rho, sigma)
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    val = np.trace(matrix_power(rho, alpha) @ matrix_power(sigma, 1.0 - alpha)).real
    return float(min(max(val, 0.0), 1.0 + 1e-9))


def tsallis_exact(rho, sigma, alpha: float) -> float:
    return (1.0 - affinity_exact(rho, sigma, alpha)) / (1.0 - alpha)


def hellinger_exact(rho, sigma) -> float:
    return math.sqrt(max(0.0, 1.0 - affinity_exact(rho, sigma, 0.5)))


def schatten_norm(m, p: float) -> float:
    """Schatten p-norm from the singular values; ``p = inf`` is the operator norm."""
    if p < 1:
        raise InvalidArgumentError(f"Schatten norm needs p >= 1, got {p}")
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if math.isinf(p):
        return float(s.max(initial=0.0))
    return float(np.sum(s ** p) ** (1.0 / p))


def trace_distance_exact(rho, sigma) -> float:
    _check_same_dim(rho, sigma)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(as_matrix(rho) - as_matrix(sigma))))))


def fidelity_exact(rho, sigma) -> float:
    """Uhlmann fidelity in the root form ``tr|√ρ √σ|``."""
    _check_same_dim(rho, sigma)
    prod = matrix_power(rho, 0.5) @ matrix_power(sigma, 0.5)
    return float(min(np.sum(np.linalg.svd(prod, compute_uv=False)), 1.0))


def petz_renyi_exact(rho, sigma, alpha: float) -> float:
    """Petz-Rényi divergence for ``α ∈ (0, 1)``; ``inf`` when the affinity vanishes."""
    a = affinity_exact(rho, sigma, alpha)
    if a <= 0.0:
        return math.inf
    return math.log(a) / (alpha - 1.0)


def petz_f_divergence(a, b, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """Petz f-divergence of PSD ``a`` with respect to PSD ``b``.

    Evaluated as the double spectral sum over eigenpairs of ``a`` and the
    support of ``b``::

        Σ_ij f(a_i / b_j) · b_j · |⟨w_j|u_i⟩|²

    ``f`` must accept numpy arrays and be finite at 0 when ``a`` is singular.
    """
    _check_same_dim(a, b)
    am, bm = as_matrix(a), as_matrix(b)
    sb = spectrum(bm)
    proj_out = np.eye(bm.shape[0]) - support_projector(bm)
    leak = schatten_norm(proj_out @ am @ proj_out, math.inf)
    if leak > RANK_TOL:
        raise InvalidArgumentError(f"ran(A) is not contained in ran(B) (leak {leak:.3e})")
    sa = spectrum(am)
    keep = sb.eigenvalues > RANK_TOL
    bvals = sb.eigenvalues[keep]
    overlap = np.abs(sb.eigenvectors[:, keep].conj().T @ sa.eigenvectors) ** 2  # [j, i]
    avals = np.clip(sa.eigenvalues, 0.0, None)
    ratio = avals[None, :] / bvals[:, None]
    return float(np.sum(f(ratio) * bvals[:, None] * overlap))


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    alpha: float
    affinity_alpha: float
    tsallis_alpha: float
    hellinger: float
    trace_distance: float
    fidelity: float
    petz_renyi_alpha: float


def divergence_report(rho, sigma, alpha: float) -> DivergenceReport:
    aff = affinity_exact(rho, sigma, alpha)
    return DivergenceReport(
        alpha=alpha,
        affinity_alpha=aff,
        tsallis_alpha=(1.0 - aff) / (1.0 - alpha),
        hellinger=hellinger_exact(rho, sigma),
        trace_distance=trace_distance_exact(rho, sigma),
        fidelity=fidelity_exact(rho, sigma),
        petz_renyi_alpha=math.inf if aff <= 0.0 else math.log(aff) / (alpha - 1.0),
    )


# -- instance file format -------------------------------------------------


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def dump_matrix(m, fp: TextIO) -> None:
    m = as_matrix(m)
    fp.write(f"dim {m.shape[0]}\n")
    for row in m:
        fp.write(" ".join(_fmt_complex(complex(z)) for z in row))
        fp.write("\n")


def dumps_matrix(m) -> str:
    buf = io.StringIO()
    dump_matrix(m, buf)
    return buf.getvalue()


def loads_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("dim"):
        raise InvalidArgumentError("instance file must start with 'dim d'")
    d = int(lines[0].split()[1])
    if len(lines) != d + 1:
        raise InvalidArgumentError(f"expected {d} matrix rows, found {len(lines) - 1}")
    m = np.empty((d, d), dtype=complex)
    for i, ln in enumerate(lines[1:]):
        toks = ln.split()
        if len(toks) != d:
            raise InvalidArgumentError(f"row {i} has {len(toks)} entries, expected {d}")
        m[i] = [complex(t.replace("i", "j")) for t in toks]
    return m


def write_instance(path: str | os.PathLike, m) -> None:
    with open(path, "w") as fp:
        dump_matrix(m, fp)


def read_instance(path: str | os.PathLike) -> DensityOperator:
    with open(path) as fp:
        return DensityOperator(loads_matrix(fp.read()))
