import numpy as np
import pytest
import scipy.sparse as sp

from simforge import operators as op
from simforge.errors import (
    AmbiguousCutError,
    DimensionCapError,
    NonHermitianError,
    SimforgeError,
)


def qubits(n, prefix=0):
    return op.SiteSystem([(prefix + k, 2) for k in range(n)])


def heis_chain(n):
    sys = qubits(n)
    h = op.named_interaction("heisenberg")
    terms = [op.LocalTerm((k, k + 1), h) for k in range(n - 1)]
    return op.HamiltonianExpr(sys, terms)


# ---------------------------------------------------------------- interactions

def test_heisenberg_eigenvalues_oracle():
    # independent oracle: direct 4x4 diagonalization
    w = np.linalg.eigvalsh(op.named_interaction("heisenberg"))
    assert np.allclose(w, [-3, 1, 1, 1], atol=1e-12)


def test_xy_eigenvalues_oracle():
    w = np.linalg.eigvalsh(op.named_interaction("xy"))
    assert np.allclose(w, [-2, 0, 0, 2], atol=1e-12)


def test_basis_projector_idempotent_trace_one():
    P = op.named_interaction("basis-projector", index=1, dim=2)
    assert np.allclose(P @ P, P)
    assert np.isclose(np.trace(P).real, 1.0)


def test_pauli_word():
    M = op.named_interaction("pauli-word", word="ZX")
    assert np.allclose(M, np.kron(op.PAULI["Z"], op.PAULI["X"]))


def test_unknown_kind_rejected():
    with pytest.raises(SimforgeError):
        op.named_interaction("ising")
    with pytest.raises(SimforgeError):
        op.named_interaction("pauli-word", word="XQ")
    with pytest.raises(SimforgeError):
        op.named_interaction("basis-projector", index=5, dim=3)


# ---------------------------------------------------------------- site systems

def test_site_system_validation():
    with pytest.raises(SimforgeError):
        op.SiteSystem([(0, 2), (0, 2)])
    with pytest.raises(SimforgeError):
        op.SiteSystem([(0, 1)])
    sys = op.SiteSystem([(0, 2), (1, 3)], coords={0: (0.0, 0.0), 1: (1.0, 0.0)})
    assert sys.total_dim == 6
    assert sys.index(1) == 1


def test_local_term_validation():
    h = op.named_interaction("heisenberg")
    with pytest.raises(SimforgeError):
        op.LocalTerm((1, 1), h)
    with pytest.raises(NonHermitianError):
        op.LocalTerm((0, 1), np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(SimforgeError):
        op.LocalTerm((0, 1, 2, 3), np.eye(16))


# ------------------------------------------------------------------- assembly

def test_assemble_empty_is_zero():
    H = op.assemble(op.HamiltonianExpr(qubits(3)))
    assert H.shape == (8, 8)
    assert np.allclose(H, 0)


def test_assemble_tensor_embedding():
    # single 2-site term on the first two of three qubits: op x I2
    sys = qubits(3)
    h = op.named_interaction("heisenberg")
    H = op.assemble(op.HamiltonianExpr(sys, [op.LocalTerm((0, 1), h)]))
    assert np.allclose(H, np.kron(h, np.eye(2)))


def test_assemble_swapped_support_symmetry():
    # heisenberg on (1,2) plus heisenberg on (2,1) equals twice heisenberg on (1,2)
    sys = qubits(2)
    h = op.named_interaction("heisenberg")
    H = op.assemble(op.HamiltonianExpr(sys, [op.LocalTerm((0, 1), h),
                                             op.LocalTerm((1, 0), h)]))
    H1 = op.assemble(op.HamiltonianExpr(sys, [op.LocalTerm((0, 1), h, 2.0)]))
    assert np.allclose(H, H1)


def test_assemble_nontrivial_order():
    # term on (2,0) of three qubits, cross-checked against a permutation oracle
    sys = qubits(3)
    M = np.kron(op.PAULI["X"], op.PAULI["Z"])   # X on site 2, Z on site 0
    H = op.assemble(op.HamiltonianExpr(sys, [op.LocalTerm((2, 0), M)]))
    want = np.kron(op.PAULI["Z"], np.kron(np.eye(2), op.PAULI["X"]))
    assert np.allclose(H, want)


def test_assemble_hermitian_and_sparse_agree():
    expr = heis_chain(5)
    Hd = op.assemble(expr)
    Hs = op.assemble(expr, dense=False)
    assert op.hermiticity_defect(Hd) <= 1e-12
    assert np.allclose(Hd, Hs.toarray())


def test_assemble_qudit_mixed_dims():
    sys = op.SiteSystem([("a", 3), ("b", 2)])
    P = op.named_interaction("basis-projector", index=2, dim=3)
    H = op.assemble(op.HamiltonianExpr(sys, [op.LocalTerm(("a",), P, 2.5)]))
    assert np.allclose(H, 2.5 * np.kron(P, np.eye(2)))


def test_dimension_cap():
    sys = op.SiteSystem([(k, 2) for k in range(23)])
    with pytest.raises(DimensionCapError):
        op.assemble(op.HamiltonianExpr(sys), dense=True)


# ------------------------------------------------------------------- spectra

def test_low_spectrum_heisenberg_pair():
    spec = op.low_spectrum(heis_chain(2), k=4)
    assert np.allclose(spec.eigenvalues, [-3, 1, 1, 1], atol=1e-10)


def test_low_spectrum_zero_hamiltonian():
    spec = op.low_spectrum(op.HamiltonianExpr(qubits(2)), k=2)
    assert np.allclose(spec.eigenvalues, [0, 0])


def test_low_spectrum_residuals():
    expr = heis_chain(6)
    spec = op.low_spectrum(expr, k=3)
    H = op.assemble(expr)
    r = np.linalg.norm(H @ spec.eigenvectors - spec.eigenvectors * spec.eigenvalues, axis=0)
    assert np.all(r <= 1e-9)


def test_iterative_matches_dense():
    # 8-qubit Heisenberg chain: ARPACK ground energy matches dense full diag to 1e-9
    expr = heis_chain(8)
    Hs = op.assemble(expr, dense=False)
    dense_w = np.linalg.eigvalsh(Hs.toarray())
    spec = op.low_spectrum(Hs, k=1)
    assert abs(spec.eigenvalues[0] - dense_w[0]) <= 1e-9


def test_iterative_matches_dense_ten_qubits():
    # larger cross-check: the k lowest eigenvalues agree to 1e-8
    expr = heis_chain(10)
    Hs = op.assemble(expr, dense=False)
    dense_w = np.linalg.eigvalsh(Hs.toarray())[:4]
    spec = op.low_spectrum(Hs, k=4)
    assert np.max(np.abs(spec.eigenvalues - dense_w)) <= 1e-8


def test_spectrum_invariant_under_site_relabeling():
    expr = heis_chain(5)
    w1 = np.linalg.eigvalsh(op.assemble(expr))
    perm_sys = expr.system.permuted([3, 1, 4, 0, 2])
    w2 = np.linalg.eigvalsh(op.assemble(op.HamiltonianExpr(perm_sys, expr.terms)))
    assert np.allclose(w1, w2, atol=1e-9)


# ------------------------------------------------------------- restrict_below

def test_restrict_full_space():
    expr = heis_chain(2)
    low = op.restrict_below(expr, 10.0)
    assert low.rank == 4
    assert np.allclose(low.projector(), np.eye(4), atol=1e-12)
    assert np.allclose(low.restricted(expr), op.assemble(expr), atol=1e-12)


def test_restrict_empty_space():
    expr = heis_chain(2)
    low = op.restrict_below(expr, -10.0)
    assert low.rank == 0
    assert np.allclose(low.restricted(expr), 0)


def test_restrict_singlet():
    low = op.restrict_below(heis_chain(2), 0.0)
    assert low.rank == 1
    assert np.isclose(low.eigenvalues[0], -3.0)


def test_restrict_ambiguous_cut():
    with pytest.raises(AmbiguousCutError):
        op.restrict_below(heis_chain(2), 1.0)


def test_restrict_idempotent_outputs():
    expr = heis_chain(4)
    a = op.restrict_below(expr, 0.5)
    b = op.restrict_below(expr, 0.5)
    assert np.array_equal(a.basis, b.basis)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_restrict_sparse_path():
    expr = heis_chain(8)
    Hs = op.assemble(expr, dense=False)
    dense_low = op.restrict_below(Hs.toarray(), -8.0)
    # force the iterative branch
    saved = op.DENSE_CUTOVER
    op.DENSE_CUTOVER = 16
    try:
        it_low = op.restrict_below(Hs, -8.0)
    finally:
        op.DENSE_CUTOVER = saved
    assert it_low.rank == dense_low.rank
    assert np.allclose(np.sort(it_low.eigenvalues), np.sort(dense_low.eigenvalues), atol=1e-8)
