"""Uniform simplicial meshes of a truncated computational box.

The full-space problem is truncated to an axis-aligned box; every nodal
function is extended by zero beyond the box (the analytic exterior-tail
contribution is handled by the assembly module).  Nodes carry labeled
regions: the scattering domain ``Omega``, measurement sets ``W1``/``W2``
and any auxiliary construction sets.  The discrete counterpart of the
compactly supported trial space on an open set ``R`` is the span of hat
functions whose support is contained in the closure of ``R``; those node
indices are what :func:`support_dofs` returns.

Supported dimensions are ``n = 1`` (primary) and ``n = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyRegion,
    NonConformingSpacing,
    RegionOverlapViolation,
    UnknownRegion,
)

#: relative tolerance used for all coordinate comparisons
COORD_RTOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned computational box ``(lower[i], upper[i])``.

    Parameters
    ----------
    lower, upper : tuple of float
        Component-wise bounds; ``lower[i] < upper[i]`` and the dimension
        must be 1 or 2.
    """

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        up = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if len(lo) != len(up):
            raise ValueError("lower and upper must have the same length")
        if len(lo) not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        if not all(l < u for l, u in zip(lo, up)):
            raise ValueError("box must satisfy lower[i] < upper[i]")

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)


@dataclass(frozen=True)
class Region:
    """Open axis-aligned box region with a label.

    All regions used by the pipelines (domain, measurement sets,
    construction sets) are open intervals / rectangles, so membership is
    a coordinate-wise comparison.  ``contains_open`` realizes the open
    set, ``contains_closed`` its closure; both use a relative tolerance
    so that grid-aligned boundaries behave predictably.
    """

    name: str
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        up = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if not all(l < u for l, u in zip(lo, up)):
            raise ValueError(f"region {self.name!r} must satisfy lower < upper")

    @property
    def n(self) -> int:
        return len(self.lower)

    def _tol(self) -> float:
        scale = max(abs(v) for v in self.lower + self.upper)
        return COORD_RTOL * max(1.0, scale)

    def contains_open(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points strictly inside the open region."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tol = self._tol()
        mask = np.ones(pts.shape[0], dtype=bool)
        for i, (l, u) in enumerate(zip(self.lower, self.upper)):
            mask &= (pts[:, i] > l + tol) & (pts[:, i] < u - tol)
        return mask

    def contains_closed(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closure of the region."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tol = self._tol()
        mask = np.ones(pts.shape[0], dtype=bool)
        for i, (l, u) in enumerate(zip(self.lower, self.upper)):
            mask &= (pts[:, i] >= l - tol) & (pts[:, i] <= u + tol)
        return mask

    def dilate(self, delta: float) -> "Region":
        """Open ``delta``-neighborhood of the region (axis-aligned hull)."""
        lo = tuple(v - delta for v in self.lower)
        up = tuple(v + delta for v in self.upper)
        return Region(self.name + f"+{delta:g}", lo, up)

    def intersects_closed(self, other: "Region") -> bool:
        """True if this open region meets the closure of ``other``."""
        for (l1, u1), (l2, u2) in zip(
            zip(self.lower, self.upper), zip(other.lower, other.upper)
        ):
            if not (u1 > l2 and l1 < u2):
                return False
        return True


@dataclass(frozen=True)
class Mesh:
    """Uniform nodal grid on a box with region labelings.

    Attributes
    ----------
    box : Box
    h : float
        Grid spacing, identical along every axis.
    nodes : ndarray, shape (N, n)
        Node coordinates in lexicographic order.
    elements : ndarray, shape (E, n+1)
        Interval endpoints (1D) or triangle vertices (2D) as node indices.
    regions : dict
        Label -> sorted array of node indices inside the open region.
    region_objects : dict
        Label -> :class:`Region` (keeps the predicate available).
    interior_dofs : ndarray
        Indices of nodes whose hat-function support lies in the closure
        of the region labeled ``"Omega"`` (empty if no such region).
    """

    box: Box
    h: float
    nodes: np.ndarray
    elements: np.ndarray
    regions: dict
    region_objects: dict
    interior_dofs: np.ndarray
    shape: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def coords(self) -> np.ndarray:
        """1D node coordinates (only for n = 1)."""
        if self.n != 1:
            raise ValueError("coords is only defined for 1D meshes")
        return self.nodes[:, 0]


def _axis_counts(box: Box, h: float) -> tuple:
    counts = []
    for l, u in zip(box.lower, box.upper):
        ratio = (u - l) / h
        m = round(ratio)
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, abs(ratio)):
            raise NonConformingSpacing(
                f"spacing {h} does not divide box extent {u - l} "
                f"(ratio {ratio} is not integral within 1e-9)"
            )
        counts.append(m)
    return tuple(counts)


def build_mesh(box: Box, h: float, regions: list | None = None) -> Mesh:
    """Build the uniform mesh of ``box`` with spacing ``h``.

    Nodes are ordered lexicographically by coordinate, which makes the
    construction bit-for-bit deterministic; refining ``h -> h/2``
    reproduces every coarse node exactly.

    Parameters
    ----------
    box : Box
    h : float
        Positive spacing; ``(upper - lower)/h`` must be integral within
        1e-9 along every axis.
    regions : list of Region, optional
        Labeled regions to realize as node masks.  Measurement regions
        (labels starting with ``"W"``) must not meet the closure of the
        region labeled ``"Omega"``.

    Raises
    ------
    NonConformingSpacing, EmptyRegion, RegionOverlapViolation
    """
    if h <= 0:
        raise NonConformingSpacing("spacing must be positive")
    regions = list(regions) if regions else []
    cells = _axis_counts(box, h)

    axes = [
        l + h * np.arange(m + 1) for l, m in zip(box.lower, cells)
    ]
    if box.n == 1:
        nodes = axes[0][:, None]
        nel = cells[0]
        elements = np.column_stack(
            [np.arange(nel), np.arange(1, nel + 1)]
        ).astype(np.int64)
        shape = (cells[0] + 1,)
    else:
        nx, ny = cells[0] + 1, cells[1] + 1
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        # node index (ix, iy) -> ix*ny + iy; lexicographic in (x, y)
        ix, iy = np.meshgrid(
            np.arange(cells[0]), np.arange(cells[1]), indexing="ij"
        )
        a = (ix * ny + iy).ravel()
        b = ((ix + 1) * ny + iy).ravel()
        c = ((ix + 1) * ny + iy + 1).ravel()
        d = (ix * ny + iy + 1).ravel()
        lower_tris = np.column_stack([a, b, c])
        upper_tris = np.column_stack([a, c, d])
        elements = np.vstack([lower_tris, upper_tris]).astype(np.int64)
        shape = (nx, ny)

    region_objects = {r.name: r for r in regions}
    omega = region_objects.get("Omega")
    masks = {}
    for r in regions:
        if r.n != box.n:
            raise ValueError(f"region {r.name!r} has wrong dimension")
        if omega is not None and r.name.startswith("W"):
            if r.intersects_closed(omega):
                raise RegionOverlapViolation(
                    f"measurement set {r.name!r} meets the closure of Omega"
                )
        idx = np.flatnonzero(r.contains_open(nodes))
        if idx.size == 0:
            raise EmptyRegion(f"region {r.name!r} captures zero nodes")
        masks[r.name] = idx

    interior = (
        _support_dofs(nodes, elements, omega)
        if omega is not None
        else np.empty(0, dtype=np.int64)
    )

    for arr in (nodes, elements, interior):
        arr.setflags(write=False)
    for idx in masks.values():
        idx.setflags(write=False)
    return Mesh(
        box=box,
        h=float(h),
        nodes=nodes,
        elements=elements,
        regions=masks,
        region_objects=region_objects,
        interior_dofs=interior,
        shape=shape,
    )


def _support_dofs(nodes: np.ndarray, elements: np.ndarray, region: Region) -> np.ndarray:
    # hat support = union of incident elements; for a convex region the
    # support lies in the closure iff all incident vertices do
    in_closure = region.contains_closed(nodes)
    elem_ok = in_closure[elements].all(axis=1)
    node_ok = np.ones(nodes.shape[0], dtype=bool)
    np.logical_and.at(node_ok, elements.ravel(), np.repeat(elem_ok, elements.shape[1]))
    node_ok &= in_closure
    # nodes not belonging to any element cannot occur on conforming meshes
    return np.flatnonzero(node_ok).astype(np.int64)


def region_dofs(mesh: Mesh, label: str) -> np.ndarray:
    """Node indices inside the open region ``label``.

    Raises
    ------
    UnknownRegion
        If ``label`` was not declared when the mesh was built.
    """
    try:
        return mesh.regions[label]
    except KeyError:
        raise UnknownRegion(
            f"unknown region {label!r}; known: {sorted(mesh.regions)}"
        ) from None


def support_dofs(mesh: Mesh, region: Region | str) -> np.ndarray:
    """Nodes whose hat-function support lies in the closure of ``region``.

    This is the discrete realization of the compactly supported trial
    space on the open set: exactly the hat functions one may use as test
    functions supported in ``region``.  Accepts a region object or the
    label of a declared region.
    """
    if isinstance(region, str):
        if region == "Omega" and "Omega" in mesh.region_objects:
            return mesh.interior_dofs
        try:
            region = mesh.region_objects[region]
        except KeyError:
            raise UnknownRegion(
                f"unknown region {region!r}; known: {sorted(mesh.region_objects)}"
            ) from None
    return _support_dofs(mesh.nodes, mesh.elements, region)


def exterior_dofs(mesh: Mesh, domain: Region | str = "Omega") -> np.ndarray:
    """Complement of :func:`support_dofs`: carriers of exterior data."""
    interior = support_dofs(mesh, domain)
    mask = np.ones(mesh.num_nodes, dtype=bool)
    mask[interior] = False
    return np.flatnonzero(mask).astype(np.int64)
