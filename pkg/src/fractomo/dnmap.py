"""Exterior Dirichlet-to-Neumann pairings and DN matrices.

The DN pairing of exterior data ``f`` against a test datum ``g`` is the
system bilinear form evaluated on the solution: ``<Lambda f, g> =
B(u_f, g)``.  Because the solution annihilates the interior rows of the
form, the value does not change when ``g`` is modified by any
interior-supported vector -- the discrete counterpart of representative
independence on the exterior quotient space.

DN matrices are finite sections over the compactly supported hat bases
of two measurement regions; all columns reuse one interior
factorization.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .assembly import Coefficients, KernelParams, SymForm, conductivity_form, mass_matrix, potential_form
from .errors import HypothesisViolation, SupportViolation
from .mesh import Mesh, region_dofs, support_dofs
from .solver import FactorizedSystem


@dataclass
class DNMatrix:
    """Finite section ``entries[j, i] = <Lambda phi_i, phi_j>``.

    ``cols`` indexes the source basis (hats of W1), ``rows`` the
    receiver basis (hats of W2).
    """

    rows: np.ndarray
    cols: np.ndarray
    entries: np.ndarray

    def symmetry_defect(self) -> float:
        """Relative asymmetry; meaningful when rows == cols."""
        if self.rows.shape != self.cols.shape or not np.array_equal(self.rows, self.cols):
            raise ValueError("symmetry is only defined for identical bases")
        scale = np.abs(self.entries).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.entries - self.entries.T).max() / scale)


class DNOperator:
    """Discrete DN machinery for one coefficient pair.

    Assembles the system form (diffusion + potential) once and keeps the
    interior factorization for all subsequent pairings and matrix
    columns.

    Parameters
    ----------
    mesh, params, coeffs
        Problem data; ``coeffs.q`` enters through the potential form.
    domain : region label or Region
        Where the equation holds (interior unknowns).
    form : SymForm, optional
        Pre-assembled system form; skips assembly when given.
    """

    def __init__(self, mesh: Mesh, params: KernelParams, coeffs: Coefficients, *,
                 domain="Omega", form: SymForm | None = None,
                 order_singular: int = 6, order_regular: int = 4):
        self.mesh = mesh
        self.params = params
        self.coeffs = coeffs
        if form is None:
            form = conductivity_form(
                mesh, params, coeffs,
                order_singular=order_singular, order_regular=order_regular,
            ) + potential_form(mesh, coeffs.q)
        self.form = form
        self.system = FactorizedSystem(form, mesh, domain=domain)

    def solve(self, f_ext: np.ndarray, far_field: float = 0.0):
        return self.system.solve(f_ext, far_field=far_field)

    def pairing(self, f: np.ndarray, g: np.ndarray, *,
                check_support: bool = True) -> float:
        """``<Lambda f, g> = B(u_f, g)`` for exterior-supported ``f, g``.

        ``check_support=False`` admits test representatives with interior
        components; the value is representative-independent because the
        solution annihilates the interior rows.
        """
        g = np.asarray(g, dtype=float)
        if check_support and np.abs(g[self.system.interior]).max(initial=0.0) > 0.0:
            raise SupportViolation("test datum has interior support")
        u = self.solve(f).u
        return float(g @ (self.form.entries @ u))

    def matrix(self, W1, W2, threads: int = 1) -> DNMatrix:
        """DN matrix over the compactly supported hats of W1 and W2.

        One interior back-substitution per column, all sharing the
        factorization; columns are independent and may be chunked over
        threads.
        """
        cols = support_dofs(self.mesh, W1)
        rows = support_dofs(self.mesh, W2)
        if cols.size == 0 or rows.size == 0:
            raise HypothesisViolation("measurement basis is empty")
        interior = self.system.interior
        B = self.form.entries
        rhs_block = -B[np.ix_(interior, cols)]

        def solve_chunk(sl):
            return la.cho_solve(self.system._chol, rhs_block[:, sl],
                                check_finite=False)

        if threads > 1 and cols.size > 1:
            chunks = np.array_split(np.arange(cols.size), threads)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda c: solve_chunk(c), chunks))
            U_int = np.hstack(parts)
        else:
            U_int = solve_chunk(slice(None))
        U = np.zeros((self.mesh.num_nodes, cols.size))
        U[cols, np.arange(cols.size)] = 1.0
        U[interior, :] = U_int
        entries = (B @ U)[rows, :]
        return DNMatrix(rows=rows, cols=cols, entries=entries)


def dn_pairing(mesh: Mesh, params: KernelParams, coeffs: Coefficients,
               f: np.ndarray, g: np.ndarray, *, domain="Omega",
               operator: DNOperator | None = None) -> float:
    """One DN pairing; see :meth:`DNOperator.pairing`."""
    op = operator or DNOperator(mesh, params, coeffs, domain=domain)
    return op.pairing(f, g)


def dn_matrix(mesh: Mesh, params: KernelParams, coeffs: Coefficients,
              W1, W2, *, domain="Omega", threads: int = 1,
              operator: DNOperator | None = None) -> DNMatrix:
    """DN matrix between the hat bases of two measurement regions."""
    op = operator or DNOperator(mesh, params, coeffs, domain=domain)
    return op.matrix(W1, W2, threads=threads)


def solution_relation_residual(mesh: Mesh, params: KernelParams,
                               pair1: Coefficients, pair2: Coefficients,
                               f: np.ndarray, W2, *, domain="Omega") -> float:
    """Discrete defect of the solution relation
    ``sqrt(gamma_1) u^(1) = sqrt(gamma_2) u^(2)``.

    Solves the exterior-value problem for both coefficient pairs with
    the same datum ``f`` and returns the relative mass-weighted L2 norm
    of ``sqrt(gamma_1) u^(1) - sqrt(gamma_2) u^(2)``.  Small exactly when
    the hypotheses of the relation lemma hold discretely (diffusions
    agree on the receiver set and the DN data coincide in the limit).

    Raises
    ------
    HypothesisViolation
        If the diffusions differ on the nodes of ``W2`` or the datum
        covers all of the receiver basis.
    SupportViolation
        If ``f`` has interior support.
    """
    w2_nodes = region_dofs(mesh, W2) if isinstance(W2, str) else np.flatnonzero(
        W2.contains_open(mesh.nodes)
    )
    if not np.allclose(pair1.gamma[w2_nodes], pair2.gamma[w2_nodes], rtol=0.0, atol=1e-13):
        raise HypothesisViolation("diffusions differ on the receiver set W2")
    f = np.asarray(f, dtype=float)
    supp = np.abs(f) > 0.0
    if supp[support_dofs(mesh, W2)].all():
        raise HypothesisViolation("datum support covers the whole receiver set")
    op1 = DNOperator(mesh, params, pair1, domain=domain)
    op2 = DNOperator(mesh, params, pair2, domain=domain)
    u1 = op1.solve(f).u
    u2 = op2.solve(f).u
    v1 = np.sqrt(pair1.gamma) * u1
    v2 = np.sqrt(pair2.gamma) * u2
    M = mass_matrix(mesh).entries
    diff = v1 - v2
    num = float(np.sqrt(diff @ (M @ diff)))
    den = float(np.sqrt(v1 @ (M @ v1)))
    return num / den if den > 0 else num
