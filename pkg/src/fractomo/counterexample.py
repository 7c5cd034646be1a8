"""Constructive non-uniqueness pair for the exterior problem.

Builds a diffusion/absorption pair ``(gamma_1, q_1)`` distinct from the
background ``(1, 0)`` whose DN data on a measurement set ``W`` agree
with the background data, while ``q_1`` does not vanish on ``W``:

1. solve the homogeneous fractional Dirichlet problem on a dilation of
   an interior set ``Omega'`` with exterior datum a smooth cutoff
   ``eta`` (equal to 1 on a seed set ``omega``); the discrete maximum
   principle keeps the solution nonnegative,
2. mollify with the standard kernel of width ``eps`` and scale by

   ``C_eps = eps^{n/2} / (2 |B_1|^{1/2} ||rho||_inf^{1/2} ||m~||_L2)``

   which caps the deviation at 1/2,
3. set ``gamma_1 = (1 + m)^2`` and define the absorption nodally from
   the weak fractional Laplacian of the deviation,
   ``q_1 = sqrt(gamma_1) * M^{-1}(A m)``.

By construction the reduced Schroedinger potential of the pair vanishes
identically, the deviation vanishes on ``W`` (so ``gamma_1 = 1`` there
exactly), and the absorption on ``W`` equals the weak fractional
Laplacian of ``m`` -- the three conditions that characterize equal DN
data against the background.

The construction only needs the 5-eps dilations of ``Omega'`` and
``omega`` and the set ``W`` to be pairwise disjoint; the seed ``omega``
may sit in the exterior (default layout, following the geometric
figure of the construction) or inside ``Omega`` away from ``Omega'``
(the text layout); both are supported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    Coefficients,
    KernelParams,
    SymForm,
    gagliardo_form,
    mass_matrix,
    potential_form,
)
from .dnmap import DNOperator
from .errors import GeometryViolation, NegativeSolution
from .mesh import Mesh, Region, region_dofs, support_dofs
from .profiles import mollifier_kernel, plateau
from .reduction import reduced_potential_form
from .solver import FactorizedSystem, multiplier_norm_estimate, poincare_constant

#: volume of the unit ball per dimension
UNIT_BALL_VOLUME = {1: 2.0, 2: np.pi}

#: tolerance of the discrete maximum principle check
MAX_PRINCIPLE_TOL = 1e-9


@dataclass
class CounterexamplePair:
    """Constructed pair and its provenance.

    ``coeffs`` bundles ``gamma_1`` and ``q_1``; ``m`` is the scaled,
    mollified deviation actually used in the construction, ``m_tilde``
    the unscaled s-harmonic extension of the cutoff, and ``c_eps`` the
    scaling constant from the formula above (before the optional extra
    ``scale`` factor).
    """

    coeffs: Coefficients
    geometry: dict
    m: np.ndarray
    m_tilde: np.ndarray
    eta: np.ndarray
    c_eps: float
    scale: float

    @property
    def gamma1(self) -> np.ndarray:
        return self.coeffs.gamma

    @property
    def q1(self) -> np.ndarray:
        return self.coeffs.q


def _interval(r: Region) -> tuple:
    return r.lower[0], r.upper[0]


def _disjoint(a: tuple, b: tuple, tol: float = 1e-12) -> bool:
    return a[1] <= b[0] + tol or b[1] <= a[0] + tol


def build_pair(mesh: Mesh, params: KernelParams, omega_prime: Region,
               omega_set: Region, eps: float, W: Region, *,
               scale: float = 1.0, eta_amplitude: float = 1.0,
               gform: SymForm | None = None,
               max_principle_tol: float = MAX_PRINCIPLE_TOL) -> CounterexamplePair:
    """Run the construction; see the module docstring.

    Parameters
    ----------
    omega_prime : Region
        Interior set ``Omega'`` on whose 2-eps dilation the deviation is
        s-harmonic.
    omega_set : Region
        Seed set of the cutoff (``eta = 1`` there).
    eps : float
        Dilation/mollification width; the 5-eps dilations of the two
        construction sets and ``W`` must be pairwise disjoint and inside
        the box.
    scale : float
        Extra factor in (0, 1] on top of ``C_eps``; shrinking the
        deviation shrinks the multiplier norm of ``q_1`` at will.

    Raises
    ------
    GeometryViolation, NegativeSolution
    """
    if mesh.n != 1:
        raise NotImplementedError("the construction pipeline is 1D")
    if eps <= 0 or not 0.0 < scale <= 1.0:
        raise ValueError("need eps > 0 and 0 < scale <= 1")
    op5 = _interval(omega_prime.dilate(5 * eps))
    om5 = _interval(omega_set.dilate(5 * eps))
    w_iv = _interval(W)
    box_iv = (mesh.box.lower[0], mesh.box.upper[0])
    for name, a, b in (
        ("Omega'(5eps) and omega(5eps)", op5, om5),
        ("Omega'(5eps) and W", op5, w_iv),
        ("omega(5eps) and W", om5, w_iv),
    ):
        if not _disjoint(a, b):
            raise GeometryViolation(f"{name} intersect")
    for name, iv in (("Omega'(5eps)", op5), ("omega(5eps)", om5), ("W", w_iv)):
        if iv[0] < box_iv[0] - 1e-12 or iv[1] > box_iv[1] + 1e-12:
            raise GeometryViolation(f"{name} leaves the computational box")
    if "Omega" in mesh.region_objects:
        om = _interval(mesh.region_objects["Omega"])
        if op5[0] < om[0] - 1e-12 or op5[1] > om[1] + 1e-12:
            raise GeometryViolation("Omega'(5eps) is not contained in Omega")

    x = mesh.coords
    if gform is None:
        gform = gagliardo_form(mesh, params)
    mass = mass_matrix(mesh)

    # cutoff eta: 1 on omega, supported strictly inside its 3-eps
    # dilation (zero amplitude degenerates the pair to the background)
    ol, ou = _interval(omega_set)
    eta = eta_amplitude * plateau(x, (ol, ou), (ol - 2.5 * eps, ou + 2.5 * eps))

    # s-harmonic extension of eta across Omega'(2eps)
    solve_region = omega_prime.dilate(2 * eps)
    interior = support_dofs(mesh, solve_region)
    sol = FactorizedSystem(gform, mesh, interior=interior).solve(eta)
    m_tilde = sol.u
    if m_tilde.min() < -max_principle_tol:
        raise NegativeSolution(
            f"s-harmonic extension dips to {m_tilde.min():.3e}, "
            "violating the maximum principle"
        )
    m_tilde = np.maximum(m_tilde, 0.0)

    # mollification and the capping scale
    kernel = mollifier_kernel(eps, mesh.h, mesh.n)
    smoothed = np.convolve(m_tilde, kernel, mode="same") * mesh.h
    rho_inf = float(kernel.max() * eps**mesh.n)
    m_tilde_l2 = float(np.sqrt(m_tilde @ (mass.entries @ m_tilde)))
    if m_tilde_l2 > 0.0:
        c_eps = eps ** (mesh.n / 2.0) / (
            2.0 * np.sqrt(UNIT_BALL_VOLUME[mesh.n]) * np.sqrt(rho_inf) * m_tilde_l2
        )
    else:
        c_eps = 0.0  # degenerate cutoff: the pair equals the background
    m = scale * c_eps * smoothed

    gamma1 = (1.0 + m) ** 2
    q_raw = np.linalg.solve(mass.entries, gform.entries @ m)
    q1 = (1.0 + m) * q_raw
    coeffs = Coefficients.from_arrays(gamma1, q1, gamma0=1.0)

    geometry = {
        "Omega_prime": _interval(omega_prime),
        "omega": _interval(omega_set),
        "W": w_iv,
        "eps": float(eps),
    }
    return CounterexamplePair(
        coeffs=coeffs, geometry=geometry, m=m, m_tilde=m_tilde, eta=eta,
        c_eps=float(c_eps), scale=float(scale),
    )


def verify_nonuniqueness(pair: CounterexamplePair, mesh: Mesh,
                         params: KernelParams, W: Region | str, *,
                         gform: SymForm | None = None, seed: int = 0,
                         num_test_pairs: int = 20) -> dict:
    """Measure how well the pair reproduces the background DN data.

    Returns a report with

    * ``dn_gap``: relative Frobenius gap between the DN matrices of the
      pair and of the background over the hat basis of ``W``,
    * ``q_gap``: share of the absorption's L2 mass on ``W`` (must stay
      bounded away from zero -- the pair is genuinely different there),
    * ``q_form_residual``: size of the reduced-potential form on random
      interior-supported test pairs (zero in the continuum),
    * ``q_form_norm``: discrete multiplier-norm estimate of the reduced
      potential form,
    * ``condition3_residual``: defect of ``(-Delta)^s m = q_1`` on the
      nodes of ``W``,
    * ``gamma_deviation_on_W``: max of ``|gamma_1 - 1|`` on ``W`` nodes,
    * ``m_min``, ``m_sup``: range of the deviation,
    * ``multiplier_estimate`` vs ``gamma0/delta0``: admissibility of the
      constructed absorption.
    """
    if gform is None:
        gform = gagliardo_form(mesh, params)
    mass = mass_matrix(mesh)
    background = Coefficients.background(mesh)

    op_pair = DNOperator(mesh, params, pair.coeffs)
    op_bg = DNOperator(mesh, params, background,
                       form=gform + potential_form(mesh, background.q))
    dn_pair = op_pair.matrix(W, W)
    dn_bg = op_bg.matrix(W, W)
    gap = np.linalg.norm(dn_pair.entries - dn_bg.entries)
    gap /= np.linalg.norm(dn_bg.entries)

    w_nodes = region_dofs(mesh, W) if isinstance(W, str) else np.flatnonzero(
        W.contains_open(mesh.nodes)
    )
    q1 = pair.q1
    l2_all = np.sqrt(mesh.h * float(q1 @ q1))
    l2_W = np.sqrt(mesh.h * float(q1[w_nodes] @ q1[w_nodes]))
    q_gap = l2_W / l2_all if l2_all > 0 else 0.0

    Q = reduced_potential_form(mesh, params, pair.coeffs, gform=gform).base
    H = gform.entries + mass.entries
    rng = np.random.default_rng(seed)
    interior = mesh.interior_dofs
    q_form_residual = 0.0
    for _ in range(num_test_pairs):
        v = np.zeros(mesh.num_nodes)
        w = np.zeros(mesh.num_nodes)
        v[interior] = rng.standard_normal(interior.size)
        w[interior] = rng.standard_normal(interior.size)
        val = abs(float(v @ (Q.entries @ w)))
        den = np.sqrt(float(v @ (H @ v))) * np.sqrt(float(w @ (H @ w)))
        q_form_residual = max(q_form_residual, val / den)
    q_form_norm = multiplier_norm_estimate(mesh, params, None, gform=gform,
                                           mass=mass, form=Q)

    q_raw = np.linalg.solve(mass.entries, gform.entries @ pair.m)
    cond3 = np.abs(q_raw[w_nodes] - q1[w_nodes]).max()
    cond3 /= max(1.0, np.abs(q1).max())

    mult = multiplier_norm_estimate(mesh, params, q1, gform=gform, mass=mass)
    pc = poincare_constant(mesh, params, gform=gform, mass=mass)
    threshold = pair.coeffs.gamma0 / pc["delta0"]

    return {
        "schema": "fractomo.nonuniqueness-report.v1",
        "dn_gap": float(gap),
        "q_gap": float(q_gap),
        "q_l2_on_W": float(l2_W),
        "q_form_residual": float(q_form_residual),
        "q_form_norm": float(q_form_norm),
        "condition3_residual": float(cond3),
        "gamma_deviation_on_W": float(np.abs(pair.gamma1[w_nodes] - 1.0).max()),
        "m_min": float(pair.m.min()),
        "m_sup": float(np.abs(pair.m).max()),
        "multiplier_estimate": float(mult),
        "admissibility_threshold": float(threshold),
        "admissible": bool(mult < threshold),
        "c_eps": pair.c_eps,
        "scale": pair.scale,
    }
