"""Reduction of the weighted-diffusion problem to a fractional
Schroedinger problem.

The reduced potential combines the weak fractional Laplacian of the
background deviation ``m = sqrt(gamma) - 1`` with the rescaled
absorption:

    ``Q = -(-Delta)^s m / sqrt(gamma) + q / gamma``.

Its discrete pairing form acts on nodal products re-interpolated onto
the hat basis, which makes the first part a diagonal matrix weighted by
the nodal values of the weak fractional Laplacian of ``m``, and the
second a similarity-scaled potential form.  Both residual checks below
quantify how well the discrete reduction reproduces the two exact
continuum identities: the form identity (energy of the original problem
equals the Schroedinger energy of the rescaled functions) and the DN
transfer identity between the two exterior maps.

These identities hold exactly only when the diffusion equals the
background value 1 near the box boundary (compactly supported
deviation); otherwise the zero extension of ``m`` introduces an
artificial jump at the truncation edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    Coefficients,
    KernelParams,
    SymForm,
    gagliardo_form,
    potential_form,
)
from .dnmap import DNOperator
from .errors import HypothesisViolation, NonPositiveGamma
from .mesh import Mesh, region_dofs
from .solver import FactorizedSystem

#: epsilon-guard scale for relative residuals
GUARD = 1e-14


@dataclass
class ReducedPotentialForm:
    """Pairing form of the reduced Schroedinger potential.

    ``base.pair(v, w)`` realizes ``<Q v, w>`` for nodal ``v, w``;
    ``gamma_ref`` records the coefficients the form was built from.
    """

    base: SymForm
    gamma_ref: Coefficients


def reduced_potential_form(mesh: Mesh, params: KernelParams,
                           coeffs: Coefficients, *,
                           gform: SymForm | None = None) -> ReducedPotentialForm:
    """Assemble the discrete pairing form of the reduced potential.

    The action on nodal vectors is

        ``v^T Q w = -(A m)^T Pi(gamma^{-1/2} v w)
                    + (gamma^{-1/2} v)^T M_q (gamma^{-1/2} w)``

    with ``A`` the Gagliardo form, ``Pi`` nodal re-interpolation of the
    pointwise product and ``M_q`` the potential form; symmetric by
    construction.  For unit diffusion this is exactly the potential
    form of ``q``.
    """
    if coeffs.gamma.min() <= 0.0:
        raise NonPositiveGamma("diffusion must be positive")
    if gform is None:
        gform = gagliardo_form(mesh, params)
    inv_sqrt = 1.0 / np.sqrt(coeffs.gamma)
    Am = gform.entries @ coeffs.m_gamma
    entries = np.diag(-Am * inv_sqrt)
    if np.any(coeffs.q != 0.0):
        Mq = potential_form(mesh, coeffs.q).entries
        entries += inv_sqrt[:, None] * Mq * inv_sqrt[None, :]
    return ReducedPotentialForm(SymForm(mesh.num_nodes, entries), coeffs)


def schrodinger_form(mesh: Mesh, params: KernelParams, coeffs: Coefficients, *,
                     gform: SymForm | None = None) -> SymForm:
    """System form of the reduced problem: Gagliardo + reduced potential."""
    if gform is None:
        gform = gagliardo_form(mesh, params)
    return gform + reduced_potential_form(mesh, params, coeffs, gform=gform).base


def liouville_residual(mesh: Mesh, params: KernelParams, coeffs: Coefficients,
                       u: np.ndarray, phi: np.ndarray, *,
                       cond_form: SymForm | None = None,
                       gform: SymForm | None = None) -> float:
    """Relative defect of the form identity
    ``B_{gamma,q}(u, phi) = B_Q(sqrt(gamma) u, sqrt(gamma) phi)``.

    Exact (to round-off) for unit diffusion; for smooth non-constant
    diffusion the defect is the nodal re-interpolation error and decays
    under mesh refinement.
    """
    from .assembly import conductivity_form

    u = np.asarray(u, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if gform is None:
        gform = gagliardo_form(mesh, params)
    if cond_form is None:
        cond_form = conductivity_form(mesh, params, coeffs) + potential_form(mesh, coeffs.q)
    lhs = float(u @ (cond_form.entries @ phi))
    sq = np.sqrt(coeffs.gamma)
    Q = reduced_potential_form(mesh, params, coeffs, gform=gform).base
    v = sq * u
    w = sq * phi
    rhs = float(v @ ((gform.entries + Q.entries) @ w))
    guard = GUARD * max(1.0, abs(lhs), abs(rhs))
    return abs(lhs - rhs) / (abs(lhs) + guard)


def dn_transfer_residual(mesh: Mesh, params: KernelParams, coeffs: Coefficients,
                         Gamma: np.ndarray, W, f: np.ndarray, g: np.ndarray, *,
                         domain="Omega",
                         operator: DNOperator | None = None,
                         gform: SymForm | None = None) -> float:
    """Relative defect of the DN transfer identity
    ``<Lambda_{gamma,q} f, g> = <Lambda_Q (Gamma^{1/2} f), Gamma^{1/2} g>``.

    ``Gamma`` is any admissible diffusion agreeing with ``coeffs.gamma``
    on the measurement region ``W``; ``f, g`` must be supported in ``W``.
    The right side solves the reduced Schroedinger problem with exterior
    datum ``Gamma^{1/2} f`` and pairs with ``Gamma^{1/2} g``.

    Raises
    ------
    HypothesisViolation
        If the diffusions differ on the nodes of ``W``.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    w_nodes = region_dofs(mesh, W) if isinstance(W, str) else np.flatnonzero(
        W.contains_open(mesh.nodes)
    )
    if not np.allclose(coeffs.gamma[w_nodes], Gamma[w_nodes], rtol=0.0, atol=1e-13):
        raise HypothesisViolation("Gamma differs from gamma on the measurement set")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if gform is None:
        gform = gagliardo_form(mesh, params)
    op = operator or DNOperator(mesh, params, coeffs, domain=domain)
    lhs = op.pairing(f, g)

    S = gform + reduced_potential_form(mesh, params, coeffs, gform=gform).base
    sqG = np.sqrt(Gamma)
    system = FactorizedSystem(S, mesh, domain=domain)
    v = system.solve(sqG * f).u
    rhs = float((sqG * g) @ (S.entries @ v))
    guard = GUARD * max(1.0, abs(lhs), abs(rhs))
    return abs(lhs - rhs) / (abs(lhs) + guard)


def dn_difference_decomposition(mesh: Mesh, params: KernelParams,
                                pair1: Coefficients, pair2: Coefficients,
                                f: np.ndarray, *, domain="Omega",
                                gform: SymForm | None = None) -> dict:
    """Three-term decomposition of ``<(Lambda_1 - Lambda_2) f, f>``.

    Returns the pairing difference, the three assembled terms (the
    deviation term driven by ``(-Delta)^s (m_2 - m_1)``, the potential
    difference term, and the solution-relation term) and the relative
    defect of the identity.  The datum ``f`` must be exterior-supported
    with one layer of exterior nodes around its support.
    """
    f = np.asarray(f, dtype=float)
    if gform is None:
        gform = gagliardo_form(mesh, params)
    op1 = DNOperator(mesh, params, pair1, domain=domain)
    op2 = DNOperator(mesh, params, pair2, domain=domain)
    lhs = op1.pairing(f, f) - op2.pairing(f, f)

    sq1 = np.sqrt(pair1.gamma)
    sq2 = np.sqrt(pair2.gamma)
    u1 = op1.solve(f).u
    u2 = op2.solve(f).u
    d_m = gform.entries @ (pair2.m_gamma - pair1.m_gamma)
    term_m = float(d_m @ (sq1 * f * f))
    term_q = float(f @ ((potential_form(mesh, pair1.q).entries
                         - potential_form(mesh, pair2.q).entries) @ f))
    term_sol = float((sq1 * u1 - sq2 * u2) @ (gform.entries @ (sq1 * f)))
    rhs = term_m + term_q + term_sol
    guard = GUARD * max(1.0, abs(lhs), abs(rhs))
    return {
        "pairing_difference": lhs,
        "deviation_term": term_m,
        "potential_term": term_q,
        "solution_term": term_sol,
        "residual": abs(lhs - rhs) / (abs(lhs) + guard),
    }
