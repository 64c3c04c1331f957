"""Bounded Chebyshev approximations of power functions.

Two builders produce the polynomials the affinity estimators feed into the
eigenvalue transform:

* :func:`build_neg_power_poly` -- odd ``p`` with ``p(x) ≈ (δ^c/2) x^(-c)`` on
  ``[δ, 1]`` and ``|p| ≤ 1`` on ``[-1, 1]``;
* :func:`build_pos_power_poly` -- even ``p`` with ``p(x) ≈ x^β / 2`` on
  ``[0, 1]`` and ``|p| ≤ 1`` on ``[-1, 1]``.

Both interpolate an analytic surrogate at Chebyshev nodes.  The surrogates are
chosen so their complex singularities sit at a controlled distance from the
real axis, which fixes the geometric decay rate of the Chebyshev coefficients.

Certification is numerical.  Polynomials of moderate degree are materialized
as coefficient vectors and checked on a grid of ``4·degree + 1000`` Chebyshev
nodes (evaluated with a DCT).  Beyond :data:`MATERIALIZE_CAP` the coefficients
are never formed: the polynomial is the degree-``D`` Chebyshev interpolant of
the surrogate, its distance to the surrogate is bounded through the Bernstein
ellipse estimate ``4 M ρ^(-D) / (ρ - 1) ≤ ε/16``, and evaluation returns the
surrogate value, which agrees with the interpolant to within that bound.  The
bound is added to the certified error and to the certified sup-norm.
"""

from __future__ import annotations

import functools
import io
import math
from dataclasses import dataclass, replace
from typing import Callable, TextIO

import numpy as np
import scipy.fft
from numpy.polynomial import chebyshev as npcheb

from .errors import CertificationError, InvalidArgumentError

MAX_INTERP_NODES = 1 << 23
MATERIALIZE_CAP = MAX_INTERP_NODES // 2
LAZY_TRIGGER = 3 * MATERIALIZE_CAP
DEGREE_CAP_FACTOR = 20.0
_CLENSHAW_MAX_DEGREE = 2048
_COS_CHUNK = 1 << 16


# -- surrogates -------------------------------------------------------------


@dataclass(frozen=True)
class NegPowerSurrogate:
    """``(δ^c/2) · x · ((1 - exp(-x²/μ)) / x²)^((c+1)/2)``, odd and entire
    apart from the zeros of ``1 - exp(-z²/μ)`` at ``z² = 2πikμ``."""

    c: float
    delta: float
    mu: float

    @property
    def singularity_distance(self) -> float:
        return math.sqrt(math.pi * self.mu)

    def g(self, z):
        z = np.asarray(z)
        u = z * z / self.mu
        small = np.abs(u) < 1e-4
        safe_z2 = np.where(small, 1.0, z * z)
        full = -np.expm1(-u) / safe_z2
        series = (1.0 - u / 2.0 + u * u / 6.0) / self.mu
        return np.where(small, series, full)

    def __call__(self, z):
        pref = self.delta ** self.c / 2.0
        return pref * np.asarray(z) * np.power(self.g(z), (self.c + 1.0) / 2.0)


@dataclass(frozen=True)
class PosPowerSurrogate:
    """``((x² + ν)^(β/2) - ν^(β/2)/2) / 2``, even, singular at ``±i√ν``."""

    beta: float
    nu: float

    @property
    def singularity_distance(self) -> float:
        return math.sqrt(self.nu)

    def __call__(self, z):
        z = np.asarray(z)
        return 0.5 * (np.power(z * z + self.nu, self.beta / 2.0) - 0.5 * self.nu ** (self.beta / 2.0))


def _neg_target(c: float, delta: float) -> Callable:
    return lambda x: (delta ** c / 2.0) * np.power(x, -c)


def _pos_target(beta: float) -> Callable:
    return lambda x: 0.5 * np.power(np.clip(x, 0.0, None), beta)


# -- the polynomial type ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ApproxPolynomial:
    """A real polynomial on ``[-1, 1]`` in the Chebyshev-T basis.

    ``cheb_coeffs`` is ``None`` for lazily represented polynomials (too high a
    degree to materialize); those evaluate through ``surrogate`` with
    ``interp_bound`` the certified distance between surrogate and polynomial.
    ``scale`` multiplies every value, so ``p.scaled(0.5)`` is ``p/2``.
    """

    cheb_coeffs: np.ndarray | None
    degree: int
    parity: str
    target_tag: tuple
    certified_error: float = math.nan
    certified_bound: float = math.nan
    certified_domain: tuple[float, float] = (-1.0, 1.0)
    degree_formula: float = math.nan
    surrogate: Callable | None = None
    interp_bound: float = 0.0
    scale: float = 1.0

    @property
    def materialized(self) -> bool:
        return self.cheb_coeffs is not None

    @property
    def degree_constant(self) -> float:
        """Achieved degree divided by the textbook degree formula."""
        return self.degree / self.degree_formula if self.degree_formula > 0 else math.nan

    def coefficients(self) -> np.ndarray:
        if self.cheb_coeffs is None:
            raise InvalidArgumentError(
                f"degree {self.degree} polynomial is not materialized (cap {MATERIALIZE_CAP})")
        return self.scale * self.cheb_coeffs

    def scaled(self, factor: float) -> "ApproxPolynomial":
        return replace(
            self,
            scale=self.scale * factor,
            certified_bound=abs(factor) * self.certified_bound,
            certified_error=math.nan,
            target_tag=("scaled", factor, self.target_tag),
        )

    def __call__(self, x):
        return eval_poly(self, x)


def from_coefficients(coeffs, parity: str = "none", tag=("custom",)) -> ApproxPolynomial:
    c = np.asarray(coeffs, dtype=float)
    c.setflags(write=False)
    bound = _grid_max_abs(c)
    return ApproxPolynomial(cheb_coeffs=c, degree=len(c) - 1, parity=parity, target_tag=tag,
                            certified_bound=bound)


def identity_poly(scale: float = 1.0) -> ApproxPolynomial:
    """``p(x) = scale · x``."""
    return from_coefficients([0.0, scale], parity="odd", tag=("linear", scale))


# -- evaluation -------------------------------------------------------------


def _cos_sum(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    theta = np.arccos(np.clip(x, -1.0, 1.0)).ravel()
    out = np.zeros(theta.shape)
    for start in range(0, len(coeffs), _COS_CHUNK):
        k = np.arange(start, min(start + _COS_CHUNK, len(coeffs)))
        out += np.cos(np.outer(theta, k)) @ coeffs[k]
    return out.reshape(np.shape(x))


def eval_poly(p: ApproxPolynomial, x):
    """Evaluate at points of ``[-1, 1]``.

    Clenshaw recurrence for degrees up to 2048, a chunked ``Σ a_k cos(kθ)``
    sum above that, and the surrogate for lazy polynomials.
    """
    xa = np.asarray(x, dtype=float)
    if p.cheb_coeffs is None:
        vals = np.real(p.surrogate(np.clip(xa, -1.0, 1.0)))
    elif p.degree <= _CLENSHAW_MAX_DEGREE:
        vals = npcheb.chebval(xa, p.cheb_coeffs)
    else:
        vals = _cos_sum(p.cheb_coeffs, xa)
    vals = p.scale * vals
    return float(vals) if np.ndim(vals) == 0 else vals


def eval_poly_matrix(p: ApproxPolynomial, h: np.ndarray) -> np.ndarray:
    """``p(H)`` for Hermitian ``H`` with spectral radius at most ``1 + 1e-9``."""
    h = np.asarray(h, dtype=complex)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    if np.max(np.abs(w), initial=0.0) > 1.0 + 1e-9:
        raise InvalidArgumentError(f"spectral radius {np.max(np.abs(w)):.6g} exceeds 1")
    return (v * eval_poly(p, np.clip(w, -1.0, 1.0))) @ v.conj().T


# -- Chebyshev machinery ----------------------------------------------------


def cheb_nodes(n: int) -> np.ndarray:
    """First-kind Chebyshev nodes ``cos(π(j + 1/2)/n)``, descending."""
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


def cheb_interpolate(f: Callable, n: int) -> np.ndarray:
    """Coefficients of the degree ``n - 1`` interpolant at first-kind nodes."""
    vals = np.real(f(cheb_nodes(n)))
    a = scipy.fft.dct(vals, type=2) / n
    a[0] /= 2.0
    return a


def values_on_cheb_grid(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Values of the series at the ``n`` first-kind nodes (``n > degree``)."""
    buf = np.zeros(n)
    buf[: len(coeffs)] = coeffs
    buf[1:] /= 2.0
    return scipy.fft.dct(buf, type=3)


def _grid_max_abs(coeffs: np.ndarray) -> float:
    n = 4 * (len(coeffs) - 1) + 1000
    vals = values_on_cheb_grid(coeffs, n)
    ends = np.array([np.sum(coeffs), np.sum(coeffs * (-1.0) ** np.arange(len(coeffs)))])
    return float(max(np.max(np.abs(vals)), np.max(np.abs(ends))))


def certify_sup_error(p: ApproxPolynomial, target: Callable, domain: tuple[float, float],
                      grid_points: int) -> float:
    """Max ``|p - target|`` over Chebyshev nodes of ``domain`` plus its endpoints.

    A grid maximum: refining the grid may raise it.  This is a heuristic
    certificate, not a rigorous bound.
    """
    a, b = domain
    x = np.concatenate([(a + b) / 2 + (b - a) / 2 * cheb_nodes(grid_points), [a, b]])
    return float(np.max(np.abs(eval_poly(p, x) - target(x))))


def _chop_index(coeffs: np.ndarray, tol: float) -> int:
    """Smallest degree ``D`` with ``Σ_{k>D} |a_k| ≤ tol``."""
    tail = np.cumsum(np.abs(coeffs[::-1]))[::-1]  # tail[k] = Σ_{j≥k} |a_j|
    ok = np.nonzero(tail <= tol)[0]
    if len(ok) == 0:
        return len(coeffs) - 1
    return max(int(ok[0]) - 1, 0)


def _bernstein_degree(surrogate, b: float, tol: float) -> tuple[int, float, float]:
    """Degree at which the interpolant is within ``tol`` of ``surrogate``.

    Samples ``|surrogate|`` on the ellipse with semi-minor axis ``b`` and
    returns ``(D, M, ρ)``.  Raises when the sampled surrogate looks
    non-analytic there (phase jumps or non-finite values).
    """
    rho = b + math.sqrt(1.0 + b * b)
    semi_major = (rho + 1.0 / rho) / 2.0
    s = surrogate.singularity_distance
    near = np.geomspace(s * 1e-4, semi_major, 40000)
    xs = np.unique(np.concatenate([np.linspace(0.0, semi_major, 20001), near]))
    theta = np.arccos(np.clip(xs / semi_major, -1.0, 1.0))
    big_m = 0.0
    for frac in (1.0, 0.5):
        r = 1.0 + frac * (rho - 1.0) if frac < 1 else rho
        z = (r * np.exp(1j * theta) + np.exp(-1j * theta) / r) / 2.0
        vals = surrogate(z)
        if not np.all(np.isfinite(vals)):
            raise CertificationError("surrogate not finite on the Bernstein ellipse")
        big_m = max(big_m, float(np.max(np.abs(vals))))
        if isinstance(surrogate, NegPowerSurrogate):
            if np.max(np.abs(np.angle(surrogate.g(z)))) > 0.9 * math.pi:
                raise CertificationError("branch of the surrogate power crosses the cut")
    d = math.ceil(math.log(4.0 * big_m / ((rho - 1.0) * tol)) / math.log(rho))
    return max(d, 1), big_m, rho


@functools.lru_cache(maxsize=256)
def _best_bernstein_degree(surrogate, tol: float) -> int:
    best = None
    for frac in (0.3, 0.45, 0.6, 0.7, 0.8, 0.9):
        try:
            d, _, _ = _bernstein_degree(surrogate, frac * surrogate.singularity_distance, tol)
        except CertificationError:
            continue
        best = d if best is None else min(best, d)
    if best is None:
        raise CertificationError("no admissible Bernstein ellipse for the surrogate")
    return best


def _domain_grid(domain: tuple[float, float], n: int, dense_near: float | None = None) -> np.ndarray:
    a, b = domain
    pts = [(a + b) / 2 + (b - a) / 2 * cheb_nodes(n), np.array([a, b])]
    if dense_near is not None:
        lo = max(a, dense_near * 1e-6) if a <= 0 else a
        pts.append(np.geomspace(max(lo, 1e-300), b, n))
    return np.concatenate(pts)


def _certify_materialized(coeffs, surrogate, target, domain, dense_near=None):
    degree = len(coeffs) - 1
    n = 4 * degree + 1000
    x = cheb_nodes(n)
    vals = values_on_cheb_grid(coeffs, n)
    a, b = domain
    signs = (-1.0) ** np.arange(len(coeffs))
    ends = {1.0: float(np.sum(coeffs)), -1.0: float(np.sum(coeffs * signs))}
    bound = max(float(np.max(np.abs(vals))), abs(ends[1.0]), abs(ends[-1.0]))
    inside = (x >= a) & (x <= b)
    err = float(np.max(np.abs(vals[inside] - target(x[inside])), initial=0.0))
    extra = np.array([a, b])
    extra_vals = _cos_sum(coeffs, extra) if degree > _CLENSHAW_MAX_DEGREE else npcheb.chebval(extra, coeffs)
    err = max(err, float(np.max(np.abs(extra_vals - target(extra)))))
    return err, bound


def _build(surrogate, target, domain, eps, parity, tag, formula, dense_near=None) -> ApproxPolynomial:
    cap = DEGREE_CAP_FACTOR * formula
    chop_tol = eps / 16.0
    d_est = _best_bernstein_degree(surrogate, chop_tol)
    if d_est > cap:
        raise CertificationError(
            f"estimated degree {d_est} exceeds cap {cap:.0f}", degree=d_est)
    if d_est <= LAZY_TRIGGER:
        # The Bernstein estimate is conservative (about 3x in practice), so
        # start below it and double until the coefficient tail has decayed.
        n = 1 << max(6, math.ceil(math.log2(d_est / 4 + 1)))
        while n <= MAX_INTERP_NODES:
            coeffs = cheb_interpolate(surrogate, n)
            if parity == "odd":
                coeffs[0::2] = 0.0
            elif parity == "even":
                coeffs[1::2] = 0.0
            deg = _chop_index(coeffs, chop_tol)
            if deg < n // 2 and deg <= cap:
                coeffs = np.array(coeffs[: deg + 1])
                err, bound = _certify_materialized(coeffs, surrogate, target, domain, dense_near)
                if err <= eps and bound <= 1.0:
                    coeffs.setflags(write=False)
                    return ApproxPolynomial(
                        cheb_coeffs=coeffs, degree=deg, parity=parity, target_tag=tag,
                        certified_error=err, certified_bound=bound, certified_domain=domain,
                        degree_formula=formula, surrogate=surrogate)
            n *= 2

    # Lazy tier: the degree-D interpolant with D from the Bernstein bound at
    # the same tail tolerance; it stays within chop_tol of the surrogate.
    interp = chop_tol
    deg = d_est
    if deg > cap:
        raise CertificationError(f"lazy degree {deg} exceeds cap {cap:.0f}", degree=deg)
    if parity == "odd" and deg % 2 == 0:
        deg += 1
    if parity == "even" and deg % 2 == 1:
        deg += 1
    grid = _domain_grid(domain, 1 << 18, dense_near)
    err = float(np.max(np.abs(np.real(surrogate(grid)) - target(grid)))) + interp
    near_zero = np.geomspace(surrogate.singularity_distance * 1e-4, 1.0, 1 << 18)
    full = np.concatenate([cheb_nodes(1 << 18), [-1.0, 0.0, 1.0], grid, near_zero, -near_zero])
    bound = float(np.max(np.abs(np.real(surrogate(full))))) + interp
    if err > eps or bound > 1.0:
        raise CertificationError(
            f"lazy certification failed (error {err:.3e}, bound {bound:.6f})",
            achieved_error=err, degree=deg)
    return ApproxPolynomial(
        cheb_coeffs=None, degree=deg, parity=parity, target_tag=tag,
        certified_error=err, certified_bound=bound, certified_domain=domain,
        degree_formula=formula, surrogate=surrogate, interp_bound=interp)


def neg_power_degree_formula(c: float, delta: float, eps: float) -> float:
    return max(1.0, c) / delta * math.log(1.0 / eps)


def pos_power_degree_formula(beta: float, eps: float) -> float:
    return (1.0 / eps) ** (1.0 / beta)


def build_neg_power_poly(c: float, delta: float, eps: float) -> ApproxPolynomial:
    """Odd polynomial approximating ``(δ^c/2) x^(-c)`` on ``[δ, 1]`` within ``eps``,
    bounded by 1 on ``[-1, 1]``."""
    if c <= 0:
        raise InvalidArgumentError(f"c must be positive, got {c}")
    if not 0 < delta < 0.5 or not 0 < eps < 0.5:
        raise InvalidArgumentError(f"delta and eps must lie in (0, 1/2), got {delta}, {eps}")
    # Cutoff bias at x = δ is ≤ (c+1) e^(-L) / 4 = eps / 4.
    big_l = math.log((c + 1.0) / eps)
    surrogate = NegPowerSurrogate(c=c, delta=delta, mu=delta * delta / big_l)
    return _build(surrogate, _neg_target(c, delta), (delta, 1.0), eps, "odd",
                  ("negpower", c, delta, eps), neg_power_degree_formula(c, delta, eps),
                  dense_near=delta)


def build_pos_power_poly(beta: float, eps: float) -> ApproxPolynomial:
    """Even polynomial approximating ``x^β / 2`` on ``[0, 1]`` within ``eps``,
    bounded by 1 on ``[-1, 1]``."""
    if not 0 < beta < 1:
        raise InvalidArgumentError(f"beta must lie in (0, 1), got {beta}")
    if not 0 < eps < 0.5:
        raise InvalidArgumentError(f"eps must lie in (0, 1/2), got {eps}")
    # Surrogate error is within ±ν^(β/2)/4 = ±eps/2.
    surrogate = PosPowerSurrogate(beta=beta, nu=(2.0 * eps) ** (2.0 / beta))
    return _build(surrogate, _pos_target(beta), (0.0, 1.0), eps, "even",
                  ("pospower", beta, eps), pos_power_degree_formula(beta, eps),
                  dense_near=surrogate.singularity_distance)


# -- text dump --------------------------------------------------------------


def dump_poly(p: ApproxPolynomial, fp: TextIO) -> None:
    coeffs = p.coefficients()
    fp.write(f"cheb {len(coeffs) - 1} {p.parity}\n")
    for a in coeffs:
        fp.write(f"{a:.17g}\n")


def dumps_poly(p: ApproxPolynomial) -> str:
    buf = io.StringIO()
    dump_poly(p, buf)
    return buf.getvalue()


def loads_poly(text: str) -> ApproxPolynomial:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 3 or head[0] != "cheb":
        raise InvalidArgumentError("polynomial dump must start with 'cheb degree parity'")
    degree, parity = int(head[1]), head[2]
    coeffs = np.array([float(t) for t in lines[1:]])
    if len(coeffs) != degree + 1:
        raise InvalidArgumentError(f"expected {degree + 1} coefficients, found {len(coeffs)}")
    return from_coefficients(coeffs, parity=parity, tag=("loaded",))
