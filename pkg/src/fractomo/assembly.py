"""Galerkin assembly of the nonlocal bilinear forms on nodal P1 bases.

Every form is a dense symmetric matrix over the full nodal basis of the
mesh; nodal functions are extended by zero outside the computational box.
The kernel-type forms (Gagliardo energy and weighted-diffusion energy)
are assembled from element-pair panels:

* identical panels and panels sharing a node use Duffy-type variable
  transformations combined with Gauss--Jacobi rules, which integrate the
  weakly singular factor exactly against the polynomial part,
* separated panels use tensor Gauss rules, batched by offset,
* the contribution of the box complement (where nodal functions vanish
  and the diffusion equals its constant exterior value) is integrated
  analytically in 1D and by sector-exact polar quadrature in 2D.

The adopted energy convention is ``u^T A u = ||(-Delta)^{s/2} u||_L2^2``,
i.e. the assembled Gagliardo form carries the factor ``C_ns / 2`` in
front of the double integral.

Forms remember their exterior-tail row sums (``tail_row``): the coupling
of each hat with a unit constant on the box complement.  By construction
``sum_j entries[i, j] == tail_row[i]`` up to round-off, which makes
globally constant functions exact kernel elements of the diffusion form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn, roots_jacobi, roots_legendre

from .errors import NonPositiveGamma, QuadratureFailure
from .mesh import Mesh


def normalization_constant(n: int, s: float) -> float:
    """Normalization constant of the singular-integral fractional Laplacian.

    Uses the standard choice ``4^s Gamma(n/2 + s) / (pi^{n/2} |Gamma(-s)|)``
    which makes the singular integral agree with the Fourier symbol
    ``|xi|^{2s}``.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"order s={s} outside (0, 1)")
    return float(
        4.0**s * gamma_fn(n / 2.0 + s) / (np.pi ** (n / 2.0) * abs(gamma_fn(-s)))
    )


@dataclass(frozen=True)
class KernelParams:
    """Dimension, fractional order and kernel normalization.

    ``C_ns`` defaults to :func:`normalization_constant`; it may be
    overridden from the configuration to experiment with other
    conventions.  Orders must satisfy ``0 < s < min(1, n/2)``.
    """

    n: int
    s: float
    C_ns: float = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if not 0.0 < self.s < min(1.0, self.n / 2.0):
            raise ValueError(
                f"order s={self.s} outside (0, min(1, n/2)) for n={self.n}"
            )
        if self.C_ns is None:
            object.__setattr__(self, "C_ns", normalization_constant(self.n, self.s))
        if not self.C_ns > 0:
            raise ValueError("C_ns must be positive")


@dataclass(frozen=True)
class Coefficients:
    """Nodal diffusion and absorption data.

    Attributes
    ----------
    gamma : ndarray
        Nodal diffusion values, bounded below by ``gamma0 > 0``.
    q : ndarray
        Nodal absorption (potential) values.
    m_gamma : ndarray
        Background deviation ``sqrt(gamma) - 1``, kept exactly consistent
        with ``gamma``.
    gamma0 : float
        Uniform ellipticity lower bound.
    gamma_exterior : float
        Constant diffusion value on the box complement (1 unless a
        globally rescaled problem is set up).
    """

    gamma: np.ndarray
    q: np.ndarray
    m_gamma: np.ndarray
    gamma0: float
    gamma_exterior: float = 1.0

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        q = np.asarray(self.q, dtype=float)
        m = np.asarray(self.m_gamma, dtype=float)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "m_gamma", m)
        if not self.gamma0 > 0:
            raise NonPositiveGamma(f"gamma0={self.gamma0} is not positive")
        if gamma.min() < self.gamma0 - 1e-14:
            raise NonPositiveGamma(
                f"gamma dips to {gamma.min()} below gamma0={self.gamma0}"
            )
        if self.gamma_exterior <= 0:
            raise NonPositiveGamma("exterior diffusion value must be positive")
        if not np.array_equal(np.sqrt(gamma) - 1.0, m):
            raise ValueError("m_gamma must equal sqrt(gamma) - 1 exactly")
        if not (np.isfinite(gamma).all() and np.isfinite(q).all()):
            raise ValueError("coefficients must be finite")

    @classmethod
    def from_arrays(cls, gamma, q=None, gamma0=None, gamma_exterior=1.0):
        """Build validated coefficients; ``m_gamma`` is derived."""
        gamma = np.asarray(gamma, dtype=float)
        if gamma.size and gamma.min() <= 0.0:
            raise NonPositiveGamma(f"gamma attains {gamma.min()} <= 0")
        if q is None:
            q = np.zeros_like(gamma)
        if gamma0 is None:
            gamma0 = float(gamma.min())
        return cls(
            gamma=gamma,
            q=np.asarray(q, dtype=float),
            m_gamma=np.sqrt(gamma) - 1.0,
            gamma0=float(gamma0),
            gamma_exterior=float(gamma_exterior),
        )

    @classmethod
    def background(cls, mesh: Mesh):
        """Unit diffusion, zero absorption."""
        return cls.from_arrays(np.ones(mesh.num_nodes), np.zeros(mesh.num_nodes))

    def with_q(self, q: np.ndarray) -> "Coefficients":
        return Coefficients(
            self.gamma, np.asarray(q, dtype=float), self.m_gamma,
            self.gamma0, self.gamma_exterior,
        )


@dataclass
class SymForm:
    """Dense symmetric bilinear form over the nodal basis."""

    dim: int
    entries: np.ndarray
    tail_row: np.ndarray = None

    def __post_init__(self):
        if self.tail_row is None:
            self.tail_row = np.zeros(self.dim)

    def __add__(self, other: "SymForm") -> "SymForm":
        if self.dim != other.dim:
            raise ValueError("form dimensions differ")
        return SymForm(
            self.dim,
            self.entries + other.entries,
            self.tail_row + other.tail_row,
        )

    def __mul__(self, scalar: float) -> "SymForm":
        return SymForm(self.dim, self.entries * scalar, self.tail_row * scalar)

    __rmul__ = __mul__

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.entries @ u

    def pair(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.entries @ v))

    def energy(self, u: np.ndarray, far_field: float = 0.0) -> float:
        """``B(u + c 1_ext, u + c 1_ext)`` for far-field constant ``c``."""
        e = float(u @ (self.entries @ u))
        if far_field != 0.0:
            e -= 2.0 * far_field * float(self.tail_row @ u)
            e += far_field**2 * float(self.tail_row.sum())
        return e

    def symmetry_defect(self) -> float:
        scale = np.abs(self.entries).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.entries - self.entries.T).max() / scale)


# ---------------------------------------------------------------------------
# local (mass / potential) forms
# ---------------------------------------------------------------------------

def mass_matrix(mesh: Mesh) -> SymForm:
    """Exact P1 mass matrix (symmetric positive definite)."""
    N = mesh.num_nodes
    M = np.zeros((N, N))
    e = mesh.elements
    if mesh.n == 1:
        h = mesh.h
        np.add.at(M, (e[:, 0], e[:, 0]), h / 3.0)
        np.add.at(M, (e[:, 1], e[:, 1]), h / 3.0)
        np.add.at(M, (e[:, 0], e[:, 1]), h / 6.0)
        np.add.at(M, (e[:, 1], e[:, 0]), h / 6.0)
    else:
        area = mesh.h**2 / 2.0
        local = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
        for a in range(3):
            for b in range(3):
                np.add.at(M, (e[:, a], e[:, b]), local[a, b])
    return SymForm(N, M)


def potential_form(mesh: Mesh, q: np.ndarray) -> SymForm:
    """Weighted mass form ``(u, v) -> int q_h u v`` with P1-interpolated q."""
    q = np.asarray(q, dtype=float)
    if q.shape[0] != mesh.num_nodes:
        raise ValueError("potential vector has wrong length for this mesh")
    if not np.isfinite(q).all():
        raise ValueError("potential must be finite at all nodes")
    N = mesh.num_nodes
    A = np.zeros((N, N))
    e = mesh.elements
    if mesh.n == 1:
        # two-point Gauss is exact for the cubic integrand q_h phi_a phi_b
        xg, wg = roots_legendre(2)
        t = 0.5 * (xg + 1.0)
        w = 0.5 * wg * mesh.h
        shapes = np.stack([1.0 - t, t])
        qe = q[e[:, 0]][:, None] * shapes[0] + q[e[:, 1]][:, None] * shapes[1]
        for a in range(2):
            for b in range(2):
                vals = (qe * shapes[a] * shapes[b]) @ w
                np.add.at(A, (e[:, a], e[:, b]), vals)
    else:
        bary, w = _triangle_rule_deg4()
        w = w * (mesh.h**2 / 2.0)
        qe = np.einsum("ea,aq->eq", q[e], bary)
        for a in range(3):
            for b in range(3):
                vals = (qe * bary[a] * bary[b]) @ w
                np.add.at(A, (e[:, a], e[:, b]), vals)
    return SymForm(N, A)


def _triangle_rule_deg4():
    """Six-point degree-4 rule on the reference triangle.

    Returns barycentric coordinates with shape (3, 6) and weights summing
    to one (multiply by the triangle area).
    """
    a1, b1 = 0.816847572980459, 0.091576213509771
    a2, b2 = 0.108103018168070, 0.445948490915965
    w1, w2 = 0.109951743655322, 0.223381589678011
    pts = np.array(
        [
            [a1, b1, b1],
            [b1, a1, b1],
            [b1, b1, a1],
            [a2, b2, b2],
            [b2, a2, b2],
            [b2, b2, a2],
        ]
    )
    weights = np.array([w1, w1, w1, w2, w2, w2]) * 3.0
    return pts.T.copy(), weights / weights.sum()


# ---------------------------------------------------------------------------
# kernel-type forms
# ---------------------------------------------------------------------------

def gagliardo_form(mesh: Mesh, params: KernelParams, *, order_singular: int = 6,
                   order_regular: int = 4, check: bool = False,
                   threads: int = 1) -> SymForm:
    """Fractional Dirichlet energy form.

    ``u^T A v = <(-Delta)^{s/2} u, (-Delta)^{s/2} v>_{L2}`` for the zero
    extensions of the nodal interpolants; the integral over the box
    complement is included (analytically in 1D).  Restricted to any
    nonempty compactly supported subspace the matrix is positive
    definite.

    Parameters
    ----------
    order_singular : int
        Gauss--Jacobi order for identical / node-sharing panels.
    order_regular : int
        Tensor Gauss order for separated panels.
    check : bool
        Re-assemble with elevated orders on the same mesh and raise
        :class:`QuadratureFailure` if the two assemblies disagree.
    """
    ones = np.ones(mesh.num_nodes)
    return _kernel_form(mesh, params, ones, 1.0, order_singular, order_regular,
                        check, threads)


def conductivity_form(mesh: Mesh, params: KernelParams, coeffs: Coefficients, *,
                      order_singular: int = 6, order_regular: int = 4,
                      check: bool = False, threads: int = 1) -> SymForm:
    """Weighted-diffusion energy form with kernel weight
    ``sqrt(gamma)(x) sqrt(gamma)(y)``.

    ``sqrt(gamma)`` enters the quadrature by nodal P1 interpolation; the
    diffusion equals ``coeffs.gamma_exterior`` on the box complement.
    """
    gamma = np.asarray(coeffs.gamma, dtype=float)
    if gamma.shape[0] != mesh.num_nodes:
        raise ValueError("gamma has wrong length for this mesh")
    if gamma.min() <= 0.0:
        raise NonPositiveGamma(f"gamma attains {gamma.min()} <= 0")
    return _kernel_form(
        mesh, params, np.sqrt(gamma), float(np.sqrt(coeffs.gamma_exterior)),
        order_singular, order_regular, check, threads,
    )


def frac_laplacian_functional(mesh: Mesh, params: KernelParams, m: np.ndarray,
                              form: SymForm | None = None) -> np.ndarray:
    """Weak fractional Laplacian of ``m``: ``F_i = <(-Delta)^s m, phi_i>``.

    Definitionally the Gagliardo form applied to ``m``; pass a
    precomputed ``form`` to avoid reassembly.
    """
    if form is None:
        form = gagliardo_form(mesh, params)
    return form.entries @ np.asarray(m, dtype=float)


def _kernel_form(mesh, params, sqrt_gamma, sqrt_gamma_ext, order_singular,
                 order_regular, check, threads=1):
    if params.n != mesh.n:
        raise ValueError("mesh and kernel params dimensions differ")

    def build(q_sing, q_reg, extra_depth=0):
        if mesh.n == 1:
            A = _kernel_inbox_1d(mesh, params.s, sqrt_gamma, q_sing, q_reg,
                                 threads=threads)
            T = _kernel_tail_1d(mesh, params.s, sqrt_gamma, q_sing)
        else:
            from ._assembly2d import MAX_DEPTH, kernel_inbox_2d, kernel_tail_2d

            A = kernel_inbox_2d(mesh, params.s, sqrt_gamma, q_reg,
                                depth=MAX_DEPTH + extra_depth)
            T = kernel_tail_2d(mesh, params.s, sqrt_gamma, q_sing)
        A *= 0.5 * params.C_ns
        T *= params.C_ns * sqrt_gamma_ext
        return A, T

    A, T = build(order_singular, order_regular)
    tail_row = T.sum(axis=1)
    A += T
    if check:
        A2, T2 = build(order_singular + 4, order_regular + 4, extra_depth=1)
        A2 += T2
        defect = float(np.abs(A - A2).max() / max(np.abs(A).max(), 1e-300))
        if defect > 5e-4:
            raise QuadratureFailure(
                f"panel self check failed: relative defect {defect:.2e}"
            )
    return SymForm(mesh.num_nodes, A, tail_row)


def _jacobi_rule(order, beta, length):
    """Nodes/weights for ``int_0^L t^beta f(t) dt`` with smooth ``f``."""
    xk, wk = roots_jacobi(order, 0.0, beta)
    t = 0.5 * length * (xk + 1.0)
    w = wk * (0.5 * length) ** (beta + 1.0)
    return t, w


def _kernel_inbox_1d(mesh, s, g, q_sing, q_reg, threads=1):
    """Raw double integral over box x box (without the C_ns/2 factor).

    With ``threads > 1`` the separated-panel offsets are distributed over
    a thread pool, each worker accumulating into its own buffer; buffers
    are summed at the end.
    """
    h = mesh.h
    M = mesh.elements.shape[0]
    N = mesh.num_nodes
    A = np.zeros((N, N))
    inv_h = 1.0 / h
    e0 = mesh.elements[:, 0]

    # --- identical panels: 2 int_0^h t^{1-2s} G(t) dt with
    #     G(t) = int_0^{h-t} g(y) g(y+t) dy, exact in y by 2-pt Gauss
    tk, twk = _jacobi_rule(q_sing, 1.0 - 2.0 * s, h)
    yg, ywg = roots_legendre(2)
    yg = 0.5 * (yg + 1.0)
    ywg = 0.5 * ywg
    p = g[mesh.elements[:, 0]]
    r = (g[mesh.elements[:, 1]] - p) * inv_h
    L = h - tk
    Y = L[:, None] * yg[None, :]  # (qt, 2)
    gy = p[:, None, None] + r[:, None, None] * Y[None, :, :]
    gyt = p[:, None, None] + r[:, None, None] * (Y + tk[:, None])[None, :, :]
    G = np.einsum("ekj,j->ek", gy * gyt, ywg) * L[None, :]
    I_same = 2.0 * (G @ twk)  # (M,)
    s_loc = np.array([-inv_h, inv_h])
    pair = s_loc[:, None] * s_loc[None, :]
    for a in range(2):
        for b in range(2):
            np.add.at(A, (e0 + a, e0 + b), I_same * pair[a, b])

    # --- node-sharing panels (offset 1): with x = p - u on the left
    #     element and y = p + v on the right one, every hat difference is
    #     homogeneous linear, d_i = a_i u + b_i v, and the two Duffy
    #     branches expose the weight r^{2-2s} exactly.
    if M >= 2:
        ab = np.array([[inv_h, 0.0], [-inv_h, inv_h], [0.0, -inv_h]])
        vk, vwk = _jacobi_rule(q_sing, 2.0 - 2.0 * s, h)
        sg, swg = roots_legendre(q_sing)
        sg = 0.5 * (sg + 1.0)
        swg = 0.5 * swg
        ker = (1.0 + sg) ** (-1.0 - 2.0 * s) * swg  # (qs,)
        X1 = ab[:, 0][:, None] * sg[None, :] + ab[:, 1][:, None]  # a_p*sg + b_p
        X2 = ab[:, 0][:, None] + ab[:, 1][:, None] * sg[None, :]  # a_p + b_p*sg
        P1 = np.einsum("pj,qj->pqj", X1, X1)
        P2 = np.einsum("pj,qj->pqj", X2, X2)
        gl = g[:-2]   # node at the far left of the union
        gm = g[1:-1]  # shared node
        gr = g[2:]
        # pair (element e as x-side, element e+1 as y-side); note x = p - u
        # walks left from the shared node, so gamma on the x-side
        # interpolates from gm toward gl
        ga1 = gm[:, None, None] + (gl - gm)[:, None, None] * inv_h * (
            sg[None, None, :] * vk[None, :, None]
        )  # u = sg*v
        gb1 = gm[:, None] + (gr - gm)[:, None] * inv_h * vk[None, :]
        F1 = np.einsum("ekj,ek,k->ej", ga1, gb1, vwk)
        T1 = np.einsum("ej,j,pqj->epq", F1, ker, P1)
        ga2 = gm[:, None] + (gl - gm)[:, None] * inv_h * vk[None, :]
        gb2 = gm[:, None, None] + (gr - gm)[:, None, None] * inv_h * (
            sg[None, None, :] * vk[None, :, None]
        )  # v = sg*u
        F2 = np.einsum("ekj,ek,k->ej", gb2, ga2, vwk)
        T2 = np.einsum("ej,j,pqj->epq", F2, ker, P2)
        L_adj = T1 + T2  # symmetric in (p, q)
        idx = np.arange(M - 1)
        # both orderings of the unordered element pair contribute equally
        for a in range(3):
            for b in range(3):
                A[idx + a, idx + b] += 2.0 * L_adj[:, a, b]

    # --- separated panels: tensor Gauss, batched per offset d >= 2
    if M >= 3:
        xg, xwg = roots_legendre(q_reg)
        xi = 0.5 * h * (xg + 1.0)
        wq = 0.5 * h * xwg
        S = np.stack([1.0 - xi * inv_h, xi * inv_h])  # (2, q)
        Ge = np.einsum("ae,aq->eq", np.stack([g[:-1], g[1:]]), S)  # (M, q)
        GW = Ge * wq[None, :]
        U = GW[None, :, :] * S[:, None, :]  # (2, M, q)
        V = np.einsum("aq,bq,eq->abeq", S, S, GW)  # (2, 2, M, q)
        diff = xi[:, None] - xi[None, :]

        def separated_block(offsets, buf):
            for d in offsets:
                K = np.abs(diff - d * h) ** (-1.0 - 2.0 * s)  # (q, q)
                m = M - d
                Ua = U[:, :m, :]
                Ub = U[:, d:, :]
                colB = GW[d:, :] @ K.T      # (m, q_i): sum_j GW_b K(i, j)
                colA = GW[:m, :] @ K        # (m, q_j): sum_i GW_a K(i, j)
                aa = np.einsum("abei,ei->eab", V[:, :, :m, :], colB)
                bb = np.einsum("abej,ej->eab", V[:, :, d:, :], colA)
                RowB = np.einsum("bej,ij->bei", Ub, K)
                ab_blk = -np.einsum("aei,bei->eab", Ua, RowB)
                idx = np.arange(m)
                ra = (idx, idx + 1)
                rb = (idx + d, idx + d + 1)
                for a in range(2):
                    for b in range(2):
                        buf[ra[a], ra[b]] += 2.0 * aa[:, a, b]
                        buf[rb[a], rb[b]] += 2.0 * bb[:, a, b]
                        buf[ra[a], rb[b]] += 2.0 * ab_blk[:, a, b]
                        buf[rb[b], ra[a]] += 2.0 * ab_blk[:, a, b]

        all_offsets = np.arange(2, M)
        if threads > 1 and all_offsets.size > threads:
            from concurrent.futures import ThreadPoolExecutor

            buffers = [np.zeros_like(A) for _ in range(threads)]
            chunks = [all_offsets[k::threads] for k in range(threads)]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(separated_block, chunks, buffers))
            for buf in buffers:
                A += buf
        else:
            separated_block(all_offsets, A)
    return A


def _kernel_tail_1d(mesh, s, g, q_sing):
    """Per-element tail block ``int_E g phi_a phi_b omega`` with
    ``omega(x) = ((x - a)^{-2s} + (b - x)^{-2s}) / (2s)`` (no C_ns)."""
    x = mesh.coords
    h = mesh.h
    a_box, b_box = mesh.box.lower[0], mesh.box.upper[0]
    M = mesh.elements.shape[0]
    N = mesh.num_nodes
    T = np.zeros((N, N))
    e0 = mesh.elements[:, 0]
    xl = x[e0]
    gl = g[mesh.elements[:, 0]]
    gr = g[mesh.elements[:, 1]]

    def accumulate(tloc, w, elem_ids):
        # tloc, w: (E, q) local coordinates in (0, h) and weights
        sh1 = 1.0 - tloc / h
        sh2 = tloc / h
        ge = gl[elem_ids][:, None] * sh1 + gr[elem_ids][:, None] * sh2
        shapes = (sh1, sh2)
        rows = e0[elem_ids]
        for a in range(2):
            for b in range(2):
                vals = np.einsum("eq,eq->e", ge * shapes[a] * shapes[b], w)
                np.add.at(T, (rows + a, rows + b), vals)

    q_reg = max(q_sing, 8)
    xg, xwg = roots_legendre(q_reg)
    xi = 0.5 * h * (xg + 1.0)
    wreg = 0.5 * h * xwg

    # left tail weight (x - a)^{-2s}, singular on the first element
    t_j, w_j = _jacobi_rule(q_reg, -2.0 * s, h)
    accumulate(t_j[None, :], w_j[None, :], np.array([0]))
    if M > 1:
        rest = np.arange(1, M)
        dist = (xl[rest][:, None] - a_box) + xi[None, :]
        accumulate(np.tile(xi, (M - 1, 1)), wreg[None, :] * dist ** (-2.0 * s), rest)

    # right tail weight (b - x)^{-2s}, singular on the last element
    xj, wj = roots_jacobi(q_reg, -2.0 * s, 0.0)
    t_last = 0.5 * h * (xj + 1.0)
    w_last = wj * (0.5 * h) ** (1.0 - 2.0 * s)
    accumulate(t_last[None, :], w_last[None, :], np.array([M - 1]))
    if M > 1:
        rest = np.arange(0, M - 1)
        dist = (b_box - xl[rest][:, None]) - xi[None, :]
        accumulate(np.tile(xi, (M - 1, 1)), wreg[None, :] * dist ** (-2.0 * s), rest)

    T /= 2.0 * s
    return T
