"""Dirichlet solves and the coercivity tool chain.

The exterior-value problem is solved by restricting the assembled system
form to the interior degrees of freedom (the Lax--Milgram system): given
exterior data ``f`` and an interior source functional ``F`` the interior
block equation reads

    ``B_II u_I = F_I - B_IE f_E + c * tail_row_I``

where ``c`` is an optional constant far-field value on the box
complement.  The interior block is symmetric positive definite whenever
the potential stays in the admissible multiplier regime; loss of
positivity is reported as :class:`CoercivityLost`.

The module also computes the discrete fractional Poincare constant, the
constant ``delta0 = 2 max(1, C_opt)`` derived from it, discrete Sobolev
multiplier norm estimates, and the resulting coercivity lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .assembly import KernelParams, SymForm, gagliardo_form, mass_matrix, potential_form
from .errors import (
    CoercivityLost,
    EigenFailure,
    EmptyRegion,
    SolverDiverged,
    SupportViolation,
)
from .mesh import Mesh, support_dofs

#: interior systems up to this size use a dense Cholesky factorization
DIRECT_CUTOFF = 2000


def _combine(forms) -> SymForm:
    if isinstance(forms, SymForm):
        return forms
    if isinstance(forms, dict):
        forms = list(forms.values())
    total = None
    for f in forms:
        total = f if total is None else total + f
    if total is None:
        raise ValueError("no forms given")
    return total


@dataclass
class DirichletSolution:
    """Solution record of one exterior-value problem.

    ``u`` equals the exterior datum exactly on non-interior dofs; the
    algebraic residual is relative to the interior right-hand side.
    """

    u: np.ndarray
    f_ext: np.ndarray
    residual: float
    energy: float
    far_field: float = 0.0


class FactorizedSystem:
    """Interior-block factorization reused across many exterior data.

    Parameters
    ----------
    forms : SymForm or iterable of SymForm
        Summed into the system form (e.g. diffusion + potential).
    mesh : Mesh
    domain : str or Region
        Region whose compactly supported hats are the unknowns.
    interior : ndarray, optional
        Explicit interior dof indices (overrides ``domain``).
    tol : float
        Relative tolerance of the iterative path.
    method : {"auto", "direct", "cg"}
    """

    def __init__(self, forms, mesh: Mesh, *, domain="Omega", interior=None,
                 tol: float = 1e-10, method: str = "auto"):
        self.form = _combine(forms)
        self.mesh = mesh
        self.tol = float(tol)
        if interior is None:
            interior = support_dofs(mesh, domain)
        self.interior = np.asarray(interior, dtype=np.int64)
        if self.interior.size == 0:
            raise EmptyRegion("domain has no interior degrees of freedom")
        mask = np.zeros(mesh.num_nodes, dtype=bool)
        mask[self.interior] = True
        self.exterior = np.flatnonzero(~mask)
        self.B_II = self.form.entries[np.ix_(self.interior, self.interior)]
        if method == "auto":
            method = "direct" if self.interior.size <= DIRECT_CUTOFF else "cg"
        self.method = method
        self._chol = None
        if method == "direct":
            diag = np.diag(self.B_II)
            if (diag <= 0).any():
                raise CoercivityLost(
                    "interior block has a nonpositive diagonal entry"
                )
            try:
                self._chol = la.cho_factor(self.B_II, lower=True, check_finite=False)
            except la.LinAlgError as exc:
                raise CoercivityLost(
                    "interior block is not positive definite: " + str(exc)
                ) from None

    def solve(self, f_ext: np.ndarray, f_src: np.ndarray | None = None,
              far_field: float = 0.0) -> DirichletSolution:
        """Solve with exterior datum ``f_ext`` and interior source ``f_src``.

        ``f_ext`` is a full nodal vector that must vanish on the interior
        dofs; ``f_src`` is the interior load functional (full nodal vector,
        only interior entries are read).  ``far_field`` is the constant
        value of the datum on the box complement.
        """
        f_ext = np.asarray(f_ext, dtype=float)
        if f_ext.shape[0] != self.mesh.num_nodes:
            raise ValueError("exterior datum has wrong length")
        if np.abs(f_ext[self.interior]).max(initial=0.0) > 0.0:
            raise SupportViolation("exterior datum is nonzero on interior dofs")
        rhs = -self.form.entries[np.ix_(self.interior, self.exterior)] @ f_ext[self.exterior]
        if far_field != 0.0:
            rhs += far_field * self.form.tail_row[self.interior]
        if f_src is not None:
            f_src = np.asarray(f_src, dtype=float)
            rhs += f_src[self.interior]
        if self.method == "direct":
            u_I = la.cho_solve(self._chol, rhs, check_finite=False)
        else:
            diag = np.diag(self.B_II)
            if (diag <= 0).any():
                raise CoercivityLost(
                    "interior block has a nonpositive diagonal entry"
                )
            precond = spla.LinearOperator(
                self.B_II.shape, matvec=lambda v: v / diag
            )
            u_I, info = spla.cg(
                self.B_II, rhs, rtol=self.tol, atol=0.0,
                maxiter=10 * self.B_II.shape[0], M=precond,
            )
            if info != 0:
                raise SolverDiverged(f"conjugate gradient failed (info={info})")
        u = f_ext.copy()
        u[self.interior] = u_I
        rnorm = np.linalg.norm(self.B_II @ u_I - rhs)
        denom = np.linalg.norm(rhs)
        residual = rnorm / denom if denom > 0 else rnorm
        energy = self.form.energy(u, far_field)
        return DirichletSolution(
            u=u, f_ext=f_ext, residual=float(residual),
            energy=float(energy), far_field=float(far_field),
        )


def solve_dirichlet(forms, mesh: Mesh, f_ext: np.ndarray,
                    f_src: np.ndarray | None = None, *, domain="Omega",
                    interior=None, far_field: float = 0.0, tol: float = 1e-10,
                    method: str = "auto") -> DirichletSolution:
    """One-shot exterior-value solve; see :class:`FactorizedSystem`."""
    system = FactorizedSystem(
        forms, mesh, domain=domain, interior=interior, tol=tol, method=method
    )
    return system.solve(f_ext, f_src, far_field)


# ---------------------------------------------------------------------------
# Poincare constant, multiplier estimate, coercivity bound
# ---------------------------------------------------------------------------

def poincare_constant(mesh: Mesh, params: KernelParams, omega="Omega", *,
                      gform: SymForm | None = None, mass: SymForm | None = None,
                      dense_cutoff: int = 500) -> dict:
    """Optimal discrete fractional Poincare constant of the region.

    ``C_opt`` is the reciprocal of the smallest eigenvalue of the raw
    Gagliardo seminorm form (``(2/C_ns) * gagliardo_form``) against the
    mass matrix over the compactly supported hats of ``omega``; the
    derived constant is ``delta0 = 2 max(1, C_opt)``.

    Returns
    -------
    dict with keys ``C_opt`` and ``delta0``.
    """
    dofs = support_dofs(mesh, omega)
    if dofs.size == 0:
        raise EmptyRegion("region has no interior degrees of freedom")
    if gform is None:
        gform = gagliardo_form(mesh, params)
    if mass is None:
        mass = mass_matrix(mesh)
    G = (2.0 / params.C_ns) * gform.entries[np.ix_(dofs, dofs)]
    M = mass.entries[np.ix_(dofs, dofs)]
    lam_min = _generalized_extreme(G, M, which="smallest",
                                   dense_cutoff=dense_cutoff, spd=True)
    if lam_min <= 0:
        raise EigenFailure(f"nonpositive seminorm eigenvalue {lam_min}")
    c_opt = 1.0 / lam_min
    return {"C_opt": float(c_opt), "delta0": float(2.0 * max(1.0, c_opt))}


def multiplier_norm_estimate(mesh: Mesh, params: KernelParams, q: np.ndarray, *,
                             gform: SymForm | None = None,
                             mass: SymForm | None = None,
                             form: SymForm | None = None,
                             dense_cutoff: int = 2500) -> float:
    """Discrete estimate of the Sobolev multiplier norm of ``q``.

    Largest absolute generalized eigenvalue of the pairing form of ``q``
    against the discrete ``H^s`` inner product ``H = gagliardo + mass``,
    taken over the full nodal space.  This is a lower bound on the true
    multiplier norm (the supremum is restricted to the nodal subspace)
    and is reported as such.

    ``form`` optionally replaces the pairing form of ``q`` (used to
    estimate the norm of an already-assembled distributional form).
    """
    if gform is None:
        gform = gagliardo_form(mesh, params)
    if mass is None:
        mass = mass_matrix(mesh)
    if form is None:
        form = potential_form(mesh, q)
    H = gform.entries + mass.entries
    lo = _generalized_extreme(form.entries, H, which="smallest",
                              dense_cutoff=dense_cutoff)
    hi = _generalized_extreme(form.entries, H, which="largest",
                              dense_cutoff=dense_cutoff)
    return float(max(abs(lo), abs(hi)))


def coercivity_bound(gamma0: float, delta0: float, q_small_norm: float) -> float:
    """Coercivity constant ``alpha = gamma0/delta0 - ||q_1||_s``.

    The caller decides admissibility by ``alpha > 0``; a nonpositive
    value signals that the small multiplier part of the potential is too
    large for the Lax--Milgram argument.
    """
    if not gamma0 > 0:
        raise ValueError("gamma0 must be positive")
    if not delta0 >= 2.0:
        raise ValueError("delta0 = 2 max(1, C_opt) is at least 2")
    return float(gamma0 / delta0 - q_small_norm)


def _generalized_extreme(A, B, which="smallest", dense_cutoff=500, spd=False):
    """Extreme eigenvalue of ``A x = lambda B x`` with ``B`` SPD.

    ``spd=True`` marks ``A`` as positive definite too, enabling the
    shift-invert Lanczos path for the smallest eigenvalue; otherwise the
    algebraically extreme eigenvalues are located directly.
    """
    n = A.shape[0]
    try:
        if n <= dense_cutoff:
            idx = [0, 0] if which == "smallest" else [n - 1, n - 1]
            vals = la.eigh(A, B, subset_by_index=idx, eigvals_only=True,
                           check_finite=False)
            return float(vals[0])
        if which == "smallest" and spd:
            vals = spla.eigsh(A, k=1, M=B, sigma=0.0, which="LM",
                              return_eigenvectors=False)
        elif which == "smallest":
            vals = spla.eigsh(A, k=1, M=B, which="SA",
                              return_eigenvectors=False)
        else:
            vals = spla.eigsh(A, k=1, M=B, which="LA",
                              return_eigenvectors=False)
        return float(vals[0])
    except (la.LinAlgError, spla.ArpackError, spla.ArpackNoConvergence) as exc:
        raise EigenFailure(str(exc)) from None
