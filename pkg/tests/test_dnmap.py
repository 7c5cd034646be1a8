import numpy as np
import pytest
from scipy.special import roots_legendre

from fractomo.assembly import (
    Coefficients,
    KernelParams,
    gagliardo_form,
    potential_form,
)
from fractomo.dnmap import DNOperator, dn_pairing, solution_relation_residual
from fractomo.errors import HypothesisViolation, SupportViolation
from fractomo.mesh import Box, Region, build_mesh, support_dofs
from fractomo.profiles import bump, plateau


@pytest.fixture(scope="module")
def setting():
    mesh = build_mesh(
        Box((-2.0,), (2.5,)), 1 / 16,
        [Region("Omega", (-1.0,), (1.0,)), Region("W1", (1.25,), (2.25,)),
         Region("W2", (1.25,), (2.25,))],
    )
    par = KernelParams(1, 0.25)
    co = Coefficients.background(mesh)
    op = DNOperator(mesh, par, co)
    return mesh, par, co, op


def test_pairing_zero_and_symmetry(setting):
    mesh, par, co, op = setting
    x = mesh.coords
    f = bump((x - 1.6) / 0.3); f[mesh.interior_dofs] = 0.0
    g = bump((x - 1.9) / 0.25); g[mesh.interior_dofs] = 0.0
    assert op.pairing(f, np.zeros_like(f)) == 0.0
    assert op.pairing(f, g) == pytest.approx(op.pairing(g, f), rel=1e-10)


def test_pairing_support_violation(setting):
    mesh, par, co, op = setting
    f = bump((mesh.coords - 1.6) / 0.3); f[mesh.interior_dofs] = 0.0
    bad = np.ones(mesh.num_nodes)
    with pytest.raises(SupportViolation):
        op.pairing(f, bad)
    with pytest.raises(SupportViolation):
        op.pairing(bad, f)


def test_well_definedness_representative_independence(setting):
    mesh, par, co, op = setting
    x = mesh.coords
    f = bump((x - 1.6) / 0.3); f[mesh.interior_dofs] = 0.0
    g = bump((x - 1.9) / 0.25); g[mesh.interior_dofs] = 0.0
    base = op.pairing(f, g)
    rng = np.random.default_rng(5)
    for _ in range(5):
        z = np.zeros(mesh.num_nodes)
        z[mesh.interior_dofs] = rng.standard_normal(mesh.interior_dofs.size)
        shifted = op.pairing(f, g + z, check_support=False)
        assert abs(shifted - base) < 1e-9


def test_disjoint_support_cross_term():
    # for disjointly supported exterior data the form value reduces to
    # the weighted double integral of -f(x) g(y) against the kernel
    mesh = build_mesh(
        Box((-2.0,), (3.0,)), 1 / 16,
        [Region("Omega", (-1.0,), (1.0,)), Region("W1", (1.2,), (2.8,))],
    )
    par = KernelParams(1, 0.25)
    co = Coefficients.background(mesh)
    x = mesh.coords
    f = bump((x - 1.5) / 0.2); f[mesh.interior_dofs] = 0.0
    g = bump((x - 2.4) / 0.2); g[mesh.interior_dofs] = 0.0
    form_value = float(f @ (gagliardo_form(mesh, par).entries @ g))
    # independent fine Gauss quadrature of the cross term
    xg, wg = roots_legendre(12)
    cells = np.arange(-2.0, 3.0, 1 / 16)
    pts = (cells[:, None] + (xg[None, :] + 1) / 32).ravel()
    wts = np.tile(wg / 32, cells.size)
    fi = np.interp(pts, x, f)
    gi = np.interp(pts, x, g)
    with np.errstate(divide="ignore"):
        K = np.abs(pts[:, None] - pts[None, :]) ** (-1 - 2 * par.s)
    np.fill_diagonal(K, 0.0)
    cross = -par.C_ns * float((wts * fi) @ K @ (wts * gi))
    assert form_value == pytest.approx(cross, rel=0.01)


def test_dn_matrix_shapes_symmetry(setting):
    mesh, par, co, op = setting
    dn = op.matrix("W1", "W2")
    n1 = support_dofs(mesh, "W1").size
    assert dn.entries.shape == (n1, n1)
    assert dn.symmetry_defect() < 1e-10


def test_dn_matrix_threads_match(setting):
    mesh, par, co, op = setting
    d1 = op.matrix("W1", "W2", threads=1)
    d2 = op.matrix("W1", "W2", threads=3)
    assert np.abs(d1.entries - d2.entries).max() < 1e-14


def test_dn_energy_bound_on_diagonal(setting):
    mesh, par, co, op = setting
    dn = op.matrix("W1", "W1")
    for k, i in enumerate(dn.cols):
        phi = np.zeros(mesh.num_nodes)
        phi[i] = 1.0
        assert dn.entries[k, k] <= op.form.energy(phi) + 1e-12


def test_dn_monotone_in_constant_potential_shift(setting):
    mesh, par, co, op = setting
    dn0 = op.matrix("W1", "W1")
    co_shift = co.with_q(co.q + 0.5)
    op_shift = DNOperator(mesh, par, co_shift,
                          form=op.form + potential_form(mesh, np.full(mesh.num_nodes, 0.5)))
    dn1 = op_shift.matrix("W1", "W1")
    diag0 = np.diag(dn0.entries)
    diag1 = np.diag(dn1.entries)
    assert (diag1 >= diag0 - 1e-12).all()


def test_dn_gamma1_q0_equals_reduced_route(setting):
    # with unit diffusion the reduced potential vanishes identically, so
    # the plain fractional-Laplacian route gives the identical matrix
    mesh, par, co, op = setting
    from fractomo.reduction import schrodinger_form

    S = schrodinger_form(mesh, par, co)
    op2 = DNOperator(mesh, par, co, form=S)
    d1 = op.matrix("W1", "W2")
    d2 = op2.matrix("W1", "W2")
    assert np.abs(d1.entries - d2.entries).max() < 1e-8


def test_dn_refinement_cauchy_rate():
    par = KernelParams(1, 0.25)
    regions = [Region("Omega", (-1.0,), (1.0,)), Region("W1", (1.25,), (2.0,))]
    values = []
    hs = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    for h in hs:
        mesh = build_mesh(Box((-1.75,), (2.5,)), h, regions)
        x = mesh.coords
        f = bump((x - 1.625) / 0.3); f[mesh.interior_dofs] = 0.0
        g = bump((x - 1.625) / 0.22); g[mesh.interior_dofs] = 0.0
        co = Coefficients.from_arrays(1.0 + 0.5 * bump(x / 1.4))
        values.append(dn_pairing(mesh, par, co, f, g))
    diffs = np.abs(np.diff(values))
    rates = np.log2(diffs[:-1] / diffs[1:])
    assert (rates > 0.5).all()


def test_solution_relation_identical_pairs(setting):
    mesh, par, co, op = setting
    x = mesh.coords
    f = bump((x - 1.6) / 0.25); f[mesh.interior_dofs] = 0.0
    r = solution_relation_residual(mesh, par, co, co, f, "W2")
    assert r < 1e-12


def test_solution_relation_hypothesis_violation(setting):
    mesh, par, co, op = setting
    x = mesh.coords
    f = bump((x - 1.6) / 0.25); f[mesh.interior_dofs] = 0.0
    gam2 = np.where((x > 1.25) & (x < 2.25), 2.0, 1.0)
    other = Coefficients.from_arrays(gam2)
    with pytest.raises(HypothesisViolation):
        solution_relation_residual(mesh, par, co, other, f, "W2")


def test_solution_relation_mismatched_floor(setting):
    mesh, par, co, op = setting
    x = mesh.coords
    f = bump((x - 1.7) / 0.35); f[mesh.interior_dofs] = 0.0
    gam2 = 1.0 + 8.0 * plateau(x, (-0.5, 0.5), (-0.9, 0.9))
    mismatched = Coefficients.from_arrays(gam2)
    r = solution_relation_residual(mesh, par, mismatched, co, f, "W2")
    assert r > 0.1


def test_dn_matrix_2d_smoke():
    mesh = build_mesh(
        Box((-2.0, -1.0), (3.0, 1.0)), 0.25,
        [Region("Omega", (-1.0, -0.5), (1.0, 0.5)),
         Region("W1", (1.5, -0.5), (2.5, 0.5))],
    )
    par = KernelParams(2, 0.3)
    co = Coefficients.background(mesh)
    op = DNOperator(mesh, par, co)
    dn = op.matrix("W1", "W1")
    assert dn.entries.shape[0] == dn.entries.shape[1] > 0
    assert dn.symmetry_defect() < 1e-10


def test_truncation_margin_invariance():
    # with background coefficients beyond the data region, the analytic
    # exterior tail makes the box truncation exact: DN pairings do not
    # move when the margin grows
    par = KernelParams(1, 0.25)
    h = 1 / 32
    vals = []
    for margin in (0.5, 2.0, 4.0):
        lo = -1.0 - margin
        cells = round((2.0 + margin - lo) / h)
        mesh = build_mesh(
            Box((lo,), (lo + cells * h,)), h,
            [Region("Omega", (-1.0,), (1.0,)), Region("W1", (1.25,), (2.0,))],
        )
        x = mesh.coords
        f = bump((x - 1.625) / 0.3); f[mesh.interior_dofs] = 0.0
        g = bump((x - 1.625) / 0.22); g[mesh.interior_dofs] = 0.0
        co = Coefficients.from_arrays(1.0 + 0.5 * bump(x / 1.4))
        vals.append(dn_pairing(mesh, par, co, f, g))
    ref = vals[-1]
    assert all(abs(v - ref) < 1e-10 * abs(ref) for v in vals)
