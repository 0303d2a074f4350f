"""Operator algebra for qudit lattices.

Defines site systems, local Hermitian terms, Hamiltonian expressions, the
tensor-product assembly into dense or sparse matrices, low-spectrum
diagonalization, and restriction to a low-energy subspace.

The tensor embedding is fixed by the site order of the owning
:class:`SiteSystem`; systems built from lattices list sites row-major over
lattice coordinates.  All matrices returned here are Hermitian to within
``HERM_TOL`` in max-entry norm.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    AmbiguousCutError,
    ConvergenceError,
    DimensionCapError,
    NonHermitianError,
    SimforgeError,
)

DIM_CAP = 2**22
DENSE_CUTOVER = 4096
HERM_TOL = 1e-12
CUT_GUARD = 1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def hermiticity_defect(op):
    """Max-entry norm of ``op - op†``."""
    return float(np.max(np.abs(op - op.conj().T)))


def named_interaction(kind, *, word=None, index=None, dim=2):
    """Return the Hermitian matrix of a named interaction.

    kinds: ``heisenberg`` (XX+YY+ZZ), ``xy`` (XX+YY), ``pauli-word``
    (tensor product of the letters in ``word``), and ``basis-projector``
    (|index><index| on one qudit of dimension ``dim``).
    """
    if kind == "heisenberg":
        return sum(np.kron(PAULI[a], PAULI[a]) for a in "XYZ")
    if kind == "xy":
        return sum(np.kron(PAULI[a], PAULI[a]) for a in "XY")
    if kind == "pauli-word":
        if not word or any(ch not in PAULI for ch in word):
            raise SimforgeError(f"invalid pauli word {word!r}")
        out = np.array([[1.0 + 0j]])
        for ch in word:
            out = np.kron(out, PAULI[ch])
        return out
    if kind == "basis-projector":
        if index is None or not 0 <= index < dim:
            raise SimforgeError(f"basis-projector index {index!r} outside dimension {dim}")
        out = np.zeros((dim, dim), dtype=complex)
        out[index, index] = 1.0
        return out
    raise SimforgeError(f"unknown interaction kind {kind!r}")


FAMILY_MATRIX = {"heisenberg": named_interaction("heisenberg"),
                 "xy": named_interaction("xy")}


class SiteSystem:
    """Ordered list of qudit sites; the order fixes the tensor embedding."""

    __slots__ = ("ids", "dims", "coords", "_index")

    def __init__(self, sites, coords=None):
        ids = []
        dims = []
        for sid, d in sites:
            if not isinstance(d, (int, np.integer)) or d < 2:
                raise SimforgeError(f"site {sid!r}: local dimension {d!r} must be an int >= 2")
            ids.append(sid)
            dims.append(int(d))
        if len(set(ids)) != len(ids):
            raise SimforgeError("site ids are not unique")
        self.ids = tuple(ids)
        self.dims = tuple(dims)
        self.coords = dict(coords) if coords else {}
        for sid in self.coords:
            if sid not in set(ids):
                raise SimforgeError(f"coordinate given for unknown site {sid!r}")
        self._index = {sid: k for k, sid in enumerate(ids)}

    @property
    def nsites(self):
        return len(self.ids)

    @property
    def total_dim(self):
        out = 1
        for d in self.dims:
            out *= d
        return out

    def index(self, sid):
        try:
            return self._index[sid]
        except KeyError:
            raise SimforgeError(f"unknown site {sid!r}") from None

    def dim(self, sid):
        return self.dims[self.index(sid)]

    def extended(self, sites, coords=None):
        """New system with extra sites appended after the existing ones."""
        merged = dict(self.coords)
        if coords:
            merged.update(coords)
        return SiteSystem(list(zip(self.ids, self.dims)) + list(sites), coords=merged)

    def permuted(self, new_order):
        """Same sites listed in a different order (relabels the embedding)."""
        return SiteSystem([(sid, self.dim(sid)) for sid in new_order], coords=self.coords)

    def __eq__(self, other):
        return (isinstance(other, SiteSystem) and self.ids == other.ids
                and self.dims == other.dims and self.coords == other.coords)

    def __repr__(self):
        return f"SiteSystem({self.nsites} sites, dim {self.total_dim})"


@dataclass(frozen=True)
class LocalTerm:
    """coeff * op acting on 1-3 sites (op given in the support's own order)."""

    sites: tuple
    op: np.ndarray
    coeff: float = 1.0

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, "sites", sites)
        if not 1 <= len(sites) <= 3 or len(set(sites)) != len(sites):
            raise SimforgeError(f"term support {sites!r} must be 1-3 distinct sites")
        op = np.asarray(self.op, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise SimforgeError("term operator must be a square matrix")
        if hermiticity_defect(op) > HERM_TOL:
            raise NonHermitianError(
                f"term on {sites!r} is non-Hermitian (defect {hermiticity_defect(op):.2e})")
        op = op.copy()
        op.flags.writeable = False
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "coeff", float(self.coeff))

    def scaled(self, factor):
        return LocalTerm(self.sites, self.op, self.coeff * factor)


class HamiltonianExpr:
    """A site system plus a list of local terms; the currency of all passes."""

    def __init__(self, system, terms=()):
        self.system = system
        self.terms = tuple(terms)
        for t in self.terms:
            want = 1
            for sid in t.sites:
                want *= system.dim(sid)
            if t.op.shape[0] != want:
                raise SimforgeError(
                    f"term on {t.sites!r}: operator dim {t.op.shape[0]} != support dim {want}")

    def with_terms(self, extra):
        return HamiltonianExpr(self.system, self.terms + tuple(extra))

    def scaled(self, factor):
        return HamiltonianExpr(self.system, [t.scaled(factor) for t in self.terms])

    def interaction_edges(self):
        """(site_a, site_b) pairs of all strictly 2-site terms."""
        return [t.sites for t in self.terms if len(t.sites) == 2]

    def max_locality(self):
        return max((len(t.sites) for t in self.terms), default=0)

    def __repr__(self):
        return f"HamiltonianExpr({self.system.nsites} sites, {len(self.terms)} terms)"


def _canonical_of_reordered(system, support):
    """Map reordered (support sites first) basis indices to canonical ones."""
    pos_sup = [system.index(s) for s in support]
    pos_rest = [p for p in range(system.nsites) if p not in set(pos_sup)]
    order = pos_sup + pos_rest
    dims = np.array(system.dims, dtype=np.int64)
    strides = np.ones(system.nsites, dtype=np.int64)
    for p in range(system.nsites - 2, -1, -1):
        strides[p] = strides[p + 1] * dims[p + 1]
    D = int(dims.prod())
    idx = np.arange(D, dtype=np.int64)
    canon = np.zeros(D, dtype=np.int64)
    rem = idx
    for p in order[::-1]:
        canon += (rem % dims[p]) * strides[p]
        rem = rem // dims[p]
    return canon


def assemble(expr, *, dense=None):
    """Sum of embedded terms as a matrix.

    Dense ndarray at or below ``DENSE_CUTOVER`` total dimension, sparse CSR
    above (overridable via ``dense=``); refuses dimensions above ``DIM_CAP``.
    """
    D = expr.system.total_dim
    if D > DIM_CAP:
        raise DimensionCapError(f"total dimension {D} exceeds cap {DIM_CAP}")
    if dense is None:
        dense = D <= DENSE_CUTOVER
    if dense and D > DIM_CAP // 256:
        # a dense matrix this large is never useful at desk scale
        raise DimensionCapError(f"dense assembly refused at dimension {D}")
    rows, cols, vals = [], [], []
    for t in expr.terms:
        rest = D // t.op.shape[0]
        M = sp.kron(sp.csr_matrix(t.op * t.coeff), sp.identity(rest, format="csr")).tocoo()
        canon = _canonical_of_reordered(expr.system, t.sites)
        rows.append(canon[M.row])
        cols.append(canon[M.col])
        vals.append(M.data)
    if rows:
        H = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(D, D)).tocsr()
        H.sum_duplicates()
    else:
        H = sp.csr_matrix((D, D), dtype=complex)
    return H.toarray() if dense else H


@dataclass
class Spectrum:
    """Ascending low eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_tol: float

    def __post_init__(self):
        if np.any(np.diff(self.eigenvalues) < -1e-12):
            raise SimforgeError("eigenvalues not nondecreasing")


def _as_matrix(obj, dense=None):
    if isinstance(obj, HamiltonianExpr):
        return assemble(obj, dense=dense)
    return obj


def low_spectrum(H, k, tol=1e-9, seed=0):
    """k smallest eigenpairs of ``H`` (expression or matrix).

    Dense LAPACK path at or below ``DENSE_CUTOVER``, implicitly-restarted
    Lanczos (ARPACK, with re-orthogonalization) above.  Residuals are checked
    against ``tol`` scaled by the spectral magnitude; non-convergence raises
    :class:`ConvergenceError` rather than truncating silently.
    """
    H = _as_matrix(H)
    D = H.shape[0]
    if k > D:
        raise SimforgeError(f"k={k} exceeds dimension {D}")
    if sp.issparse(H) and D <= DENSE_CUTOVER:
        H = H.toarray()
    if not sp.issparse(H):
        if k <= D // 4 and D >= 1024:
            w, v = sla.eigh(H, subset_by_index=[0, k - 1])
        else:
            w, v = np.linalg.eigh(H)
            w, v = w[:k], v[:, :k]
    else:
        if k >= D - 1:
            raise SimforgeError("iterative path needs k < dim-1; assemble dense instead")
        rng = np.random.RandomState(seed)
        v0 = rng.standard_normal(D)
        try:
            w, v = spla.eigsh(H, k=k, which="SA", v0=v0, maxiter=max(2000, 40 * D))
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from None
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    scale = max(1.0, float(np.max(np.abs(w))) if len(w) else 1.0)
    resid = np.linalg.norm(H @ v - v * w[None, :], axis=0)
    bound = tol * scale
    if np.any(resid > bound):
        raise ConvergenceError(
            f"eigenpair residual {resid.max():.2e} exceeds {bound:.2e}")
    return Spectrum(w, v, float(resid.max() if len(resid) else 0.0))


@dataclass
class LowEnergySpace:
    """Span of eigenvectors of H with eigenvalue <= delta."""

    delta: float
    eigenvalues: np.ndarray
    basis: np.ndarray          # D x rank, orthonormal columns
    full_dim: int

    @property
    def rank(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.conj().T

    def restricted(self, H):
        """H multiplied by the projector (equals P H P since [H, P] = 0)."""
        H = _as_matrix(H)
        return (H @ self.basis) @ self.basis.conj().T

    def compressed(self, H):
        """rank x rank matrix of H within the low-energy basis."""
        H = _as_matrix(H)
        return self.basis.conj().T @ (H @ self.basis)


def restrict_below(H, delta, seed=0, k0=64):
    """Low-energy space of all eigenvectors with eigenvalue <= delta.

    An eigenvalue within ``CUT_GUARD`` (scaled) of the cut is rejected as
    ambiguous; shift delta instead of tie-breaking.  ``k0`` seeds the
    guess-and-grow subset size (callers that know the expected rank pass a
    slightly larger hint).
    """
    if not np.isfinite(delta):
        raise SimforgeError("delta must be finite")
    H = _as_matrix(H)
    D = H.shape[0]
    if sp.issparse(H) and D <= DENSE_CUTOVER:
        H = H.toarray()
    if not sp.issparse(H):
        if D >= 1024:
            # grow a dense subset until it clears the cut
            k = min(D, k0)
            while True:
                w, v = sla.eigh(H, subset_by_index=[0, k - 1])
                if k == D or w[-1] > delta:
                    break
                k = min(D, 2 * k)
        else:
            w, v = np.linalg.eigh(H)
    else:
        k = min(D - 2, k0)
        while True:
            spec = low_spectrum(H, k, seed=seed)
            w, v = spec.eigenvalues, spec.eigenvectors
            if w[-1] > delta or k >= D - 2:
                break
            k = min(D - 2, 2 * k)
    scale = max(1.0, float(np.max(np.abs(w))) if len(w) else 1.0)
    if np.any(np.abs(w - delta) < CUT_GUARD * scale):
        raise AmbiguousCutError(
            f"eigenvalue within {CUT_GUARD * scale:.1e} of the cut {delta}; shift delta")
    keep = w <= delta
    return LowEnergySpace(float(delta), w[keep], v[:, keep], D)


def spectral_norm(M):
    """Operator norm via exact dense decomposition (desk scale only)."""
    M = np.asarray(M)
    if hermiticity_defect(M) <= 1e-10 * max(1.0, float(np.max(np.abs(M)))):
        w = np.linalg.eigvalsh(M)
        return float(np.max(np.abs(w))) if len(w) else 0.0
    return float(np.linalg.norm(M, 2))
