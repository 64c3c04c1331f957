import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsallis_lab.densityops import (
    DensityOperator, affinity_exact, divergence_report, dumps_matrix, fidelity_exact,
    hellinger_exact, loads_matrix, matrix_power, petz_f_divergence, petz_renyi_exact,
    random_low_rank_state, read_instance, schatten_norm, spectrum, trace_distance_exact,
    tsallis_exact, write_instance)
from tsallis_lab.errors import DimensionMismatchError, InvalidArgumentError

DIAG = DensityOperator.diagonal([0.75, 0.25])
MIXED = DensityOperator.maximally_mixed(2)
ZERO = DensityOperator.basis(2, 0)
ONE = DensityOperator.basis(2, 1)
PLUS = DensityOperator.pure([1, 1])

seeds = st.integers(min_value=0, max_value=2 ** 32)
dims = st.sampled_from([2, 4, 8])


@st.composite
def state_pairs(draw):
    d = draw(dims)
    r1 = draw(st.integers(1, d))
    r2 = draw(st.integers(1, d))
    s = draw(seeds)
    return random_low_rank_state(d, r1, s), random_low_rank_state(d, r2, s + 1)


# -- construction and validation -------------------------------------------


def test_rejects_non_hermitian():
    with pytest.raises(InvalidArgumentError):
        DensityOperator(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_rejects_bad_trace_and_negative_spectrum():
    with pytest.raises(InvalidArgumentError):
        DensityOperator(np.eye(2))
    with pytest.raises(InvalidArgumentError):
        DensityOperator(np.diag([1.5, -0.5]))


def test_rejects_non_power_of_two():
    with pytest.raises(InvalidArgumentError):
        DensityOperator(np.eye(3) / 3)


def test_entries_are_read_only():
    with pytest.raises(ValueError):
        DIAG.entries[0, 0] = 1.0


def test_random_pure_state():
    rho = random_low_rank_state(2, 1, 123)
    assert rho.rank == 1
    assert abs(rho.eigenvalues[0] - 1.0) < 1e-12


def test_random_state_is_deterministic():
    a = random_low_rank_state(4, 2, 7)
    b = random_low_rank_state(4, 2, 7)
    assert np.array_equal(a.entries, b.entries)


def test_random_state_rank_independent_solver():
    rho = random_low_rank_state(4, 2, 7)
    w = np.linalg.eigvals(rho.entries).real  # general solver, not eigh
    assert np.count_nonzero(w > 1e-9) == 2
    assert abs(w[w > 1e-9].sum() - 1.0) < 1e-12


def test_random_state_rank_too_large():
    with pytest.raises(InvalidArgumentError):
        random_low_rank_state(2, 3, 0)


@given(d=dims, s=seeds, data=st.data())
@settings(max_examples=40, deadline=None)
def test_random_state_invariants(d, s, data):
    r = data.draw(st.integers(1, d))
    rho = random_low_rank_state(d, r, s)
    m = rho.entries
    assert np.max(np.abs(m - m.conj().T)) <= 1e-10
    assert np.linalg.eigvalsh(m).min() >= -1e-10
    assert abs(np.trace(m) - 1) <= 1e-10
    assert rho.rank == r
    sp = rho.spectrum
    assert np.linalg.norm(sp.reconstruct() - m, 2) <= 1e-9
    u = sp.eigenvectors
    assert np.max(np.abs(u.conj().T @ u - np.eye(d))) <= 1e-10
    assert np.all(np.diff(sp.eigenvalues) <= 1e-15)


# -- matrix power ----------------------------------------------------------


def test_matrix_power_examples():
    assert np.allclose(matrix_power(MIXED, 0.5), np.eye(2) / math.sqrt(2), atol=1e-14)
    assert np.allclose(matrix_power(ZERO, -0.5), ZERO.entries, atol=1e-14)
    got = np.diag(matrix_power(DIAG, 0.3)).real
    assert np.allclose(got, [0.75 ** 0.3, 0.25 ** 0.3], atol=1e-14)
    assert abs(got[0] - 0.917314) < 1e-6 and abs(got[1] - 0.659754) < 1e-6


def test_matrix_power_small_exponent_ignores_kernel_noise():
    rho = random_low_rank_state(8, 2, 3)
    p = matrix_power(rho, 0.01)
    assert np.linalg.matrix_rank(p, tol=1e-6) == 2


# -- oracles ---------------------------------------------------------------


def test_affinity_examples():
    assert abs(affinity_exact(DIAG, DIAG, 0.3) - 1.0) < 1e-10
    assert abs(affinity_exact(ZERO, PLUS, 0.7) - 0.5) < 1e-12
    assert abs(affinity_exact(DIAG, MIXED, 0.5) - 0.9659258263) < 1e-10
    expected = (math.sqrt(1.5) + math.sqrt(0.5)) / 2
    assert abs(affinity_exact(DIAG, MIXED, 0.5) - expected) < 1e-14


def test_affinity_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        affinity_exact(DIAG, DensityOperator.maximally_mixed(4), 0.5)


def test_affinity_alpha_range():
    with pytest.raises(InvalidArgumentError):
        affinity_exact(DIAG, MIXED, 1.0)


def test_tsallis_examples():
    assert abs(tsallis_exact(DIAG, DIAG, 0.4)) < 1e-10
    assert abs(tsallis_exact(ZERO, ONE, 0.5) - 2.0) < 1e-12
    assert abs(tsallis_exact(DIAG, MIXED, 0.5) - 0.0681483474) < 1e-10


def test_hellinger_examples():
    assert hellinger_exact(DIAG, DIAG) < 1e-7
    assert abs(hellinger_exact(ZERO, ONE) - 1.0) < 1e-12
    # sqrt(1 - 0.9659258263)
    assert abs(hellinger_exact(DIAG, MIXED) - 0.1845919113) < 1e-10


def test_distance_and_fidelity_examples():
    assert abs(trace_distance_exact(DIAG, DIAG)) < 1e-12
    assert abs(fidelity_exact(DIAG, DIAG) - 1.0) < 1e-10
    assert abs(petz_renyi_exact(DIAG, DIAG, 0.5)) < 1e-10
    assert abs(trace_distance_exact(ZERO, ONE) - 1.0) < 1e-12
    assert abs(fidelity_exact(ZERO, ONE)) < 1e-12
    assert petz_renyi_exact(ZERO, ONE, 0.5) == math.inf


def test_petz_renyi_identity():
    rho, sigma = random_low_rank_state(4, 2, 11), random_low_rank_state(4, 2, 12)
    a = affinity_exact(rho, sigma, 0.5)
    assert abs(petz_renyi_exact(rho, sigma, 0.5) + 2 * math.log(a)) < 1e-12


def test_schatten_examples():
    assert abs(schatten_norm(np.eye(4), 1) - 4) < 1e-12
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 4)))
    assert abs(schatten_norm(q, math.inf) - 1) < 1e-12
    assert abs(schatten_norm(random_low_rank_state(4, 2, 5), 1) - 1) < 1e-12
    with pytest.raises(InvalidArgumentError):
        schatten_norm(np.eye(2), 0.5)


def test_divergence_report_consistency():
    rep = divergence_report(DIAG, MIXED, 0.5)
    assert abs(rep.tsallis_alpha - (1 - rep.affinity_alpha) / 0.5) < 1e-12
    assert abs(rep.hellinger - math.sqrt(1 - affinity_exact(DIAG, MIXED, 0.5))) < 1e-12


# -- Petz f-divergence -----------------------------------------------------


def _full_rank_pair(seed):
    return random_low_rank_state(4, 4, seed), random_low_rank_state(4, 4, seed + 100)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_petz_tsallis_generator(alpha):
    # (x - x^a)/(1 - a) reproduces D_T; the generator (x^a - x)/(1 - a) gives its negative.
    rho, sigma = _full_rank_pair(3)
    good = petz_f_divergence(rho, sigma, lambda x: (x - x ** alpha) / (1 - alpha))
    flipped = petz_f_divergence(rho, sigma, lambda x: (x ** alpha - x) / (1 - alpha))
    assert abs(good - tsallis_exact(rho, sigma, alpha)) < 1e-9
    assert abs(flipped + tsallis_exact(rho, sigma, alpha)) < 1e-9


def _xlogx(x):
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def test_petz_umegaki_zero_on_equal_states():
    rho = random_low_rank_state(4, 3, 8)
    assert abs(petz_f_divergence(rho, rho, _xlogx)) < 1e-9


def test_petz_umegaki_matches_direct_formula():
    direct = 0.75 * math.log(0.75 / 0.5) + 0.25 * math.log(0.25 / 0.5)
    assert abs(petz_f_divergence(DIAG, MIXED, _xlogx) - direct) < 1e-9


def test_petz_range_violation():
    with pytest.raises(InvalidArgumentError):
        petz_f_divergence(MIXED, ZERO, _xlogx)


# -- properties ------------------------------------------------------------


@given(pair=state_pairs(), alpha=st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_affinity_symmetry(pair, alpha):
    rho, sigma = pair
    assert abs(affinity_exact(rho, sigma, alpha) - affinity_exact(sigma, rho, 1 - alpha)) < 1e-10


@given(pair=state_pairs(), alpha=st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_pinsker_sandwich(pair, alpha):
    rho, sigma = pair
    d = trace_distance_exact(rho, sigma)
    dt = tsallis_exact(rho, sigma, alpha)
    lower = 2 * alpha * d ** 2 + (2 / 9) * alpha * (alpha + 1) * (2 - alpha) * d ** 4
    assert lower <= dt + 1e-9
    assert dt <= d / (1 - alpha) + 1e-9


@given(pair=state_pairs())
@settings(max_examples=60, deadline=None)
def test_hellinger_sandwich(pair):
    rho, sigma = pair
    dh, dt = hellinger_exact(rho, sigma), trace_distance_exact(rho, sigma)
    assert dh ** 2 <= dt + 1e-9
    assert dt <= math.sqrt(2) * dh + 1e-9


@given(pair=state_pairs())
@settings(max_examples=40, deadline=None)
def test_fidelity_and_affinity_ranges(pair):
    rho, sigma = pair
    f = fidelity_exact(rho, sigma)
    a = affinity_exact(rho, sigma, 0.5)
    assert 0 <= f <= 1 and 0 <= a <= 1 + 1e-9
    # tr(√ρ√σ) never exceeds the fidelity ‖√ρ√σ‖₁
    assert a <= f + 1e-9


# -- instance files ----------------------------------------------------------


def test_instance_round_trip(tmp_path):
    rho = random_low_rank_state(4, 3, 99)
    path = tmp_path / "rho.txt"
    write_instance(path, rho)
    back = read_instance(path)
    assert np.array_equal(back.entries, rho.entries)
    assert path.read_text().splitlines()[0] == "dim 4"


def test_instance_format_errors():
    with pytest.raises(InvalidArgumentError):
        loads_matrix("2\n1 0\n0 0\n")
    with pytest.raises(InvalidArgumentError):
        loads_matrix("dim 2\n1+0i 0+0i\n")


def test_dumps_uses_re_im_i_tokens():
    text = dumps_matrix(PLUS)
    assert "0.5+0i" in text.replace("0.50000000000000011", "0.5").replace(
        "0.49999999999999989", "0.5")


def test_spectrum_descending():
    sp = spectrum(np.diag([0.1, 0.7, 0.2]))
    assert list(np.round(sp.eigenvalues, 12)) == [0.7, 0.2, 0.1]
