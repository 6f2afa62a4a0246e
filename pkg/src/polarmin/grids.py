"""Polar tensor grids on disks and annuli: quadrature, gradients, reflections.

All fields live on a cell-centered-in-radius, uniform-in-angle mesh.  The
angular node count is a multiple of 4 so that reflections across the
coordinate axes (and across any half-plane whose normal is a multiple of
half the angular spacing) permute nodes exactly, with no interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "RadialDomain",
    "PolarGrid",
    "Field",
    "disk",
    "annulus",
    "build_polar_grid",
    "integrate",
    "grad_sq",
    "dirichlet_energy",
    "laplacian",
    "reflect_field",
    "rotate_field",
    "reflection_index_map",
    "dump_field",
    "parse_field",
]


@dataclass(frozen=True)
class RadialDomain:
    """Disk or annulus centered at the origin.

    Invariant under every rotation about the origin and every reflection
    through a line containing the origin.
    """

    kind: Literal["disk", "annulus"]
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if self.kind not in ("disk", "annulus"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not (math.isfinite(self.r_inner) and math.isfinite(self.r_outer)):
            raise ValueError("radii must be finite")
        if self.r_inner < 0.0:
            raise ValueError("r_inner must be >= 0")
        if self.r_outer <= self.r_inner:
            raise ValueError("degenerate domain: r_outer must exceed r_inner")
        if self.kind == "disk" and self.r_inner != 0.0:
            raise ValueError("disk requires r_inner = 0")
        if self.kind == "annulus" and self.r_inner == 0.0:
            raise ValueError("annulus requires r_inner > 0")

    @property
    def area(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)


def disk(radius: float = 1.0) -> RadialDomain:
    return RadialDomain("disk", 0.0, radius)


def annulus(r_inner: float, r_outer: float) -> RadialDomain:
    return RadialDomain("annulus", r_inner, r_outer)


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Tensor polar mesh with midpoint quadrature weights.

    Radial nodes are cell-centered, r_i = r_inner + (i + 1/2) dr, so no node
    sits at the origin on a disk.  Angular nodes are a_j = 2*pi*j/n_a.  The
    weight of node (i, j) is r_i*dr*da, which sums exactly to the domain
    area.
    """

    domain: RadialDomain
    n_r: int
    n_a: int
    r_nodes: np.ndarray
    a_nodes: np.ndarray
    w: np.ndarray

    @property
    def delta_r(self) -> float:
        return (self.domain.r_outer - self.domain.r_inner) / self.n_r

    @property
    def delta_a(self) -> float:
        return 2.0 * math.pi / self.n_a

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_a)

    @property
    def n_nodes(self) -> int:
        return self.n_r * self.n_a

    def key(self) -> tuple:
        """Hashable identity of the mesh (domain geometry + resolution)."""
        d = self.domain
        return (d.kind, d.r_inner, d.r_outer, self.n_r, self.n_a)

    # Differential operators are assembled once per grid and cached.  The
    # stiffness matrix is the exact Hessian of the discrete Dirichlet
    # energy, so the Laplacian below is its exact first variation.

    @cached_property
    def _radial_diff(self) -> sp.csr_matrix:
        """Sparse radial derivative: central in the interior, one-sided at
        the radial boundaries, pole-transparent (neighbor at angle a+pi) on
        the innermost disk ring."""
        n_r, n_a = self.n_r, self.n_a
        dr = self.delta_r
        rows, cols, vals = [], [], []

        def nid(i, j):
            return i * n_a + (j % n_a)

        jj = np.arange(n_a)
        # interior rings: central
        for i in range(1, n_r - 1):
            rows.append(nid(i, jj))
            cols.append(nid(i + 1, jj))
            vals.append(np.full(n_a, 0.5 / dr))
            rows.append(nid(i, jj))
            cols.append(nid(i - 1, jj))
            vals.append(np.full(n_a, -0.5 / dr))
        # outer ring: one-sided
        rows.append(nid(n_r - 1, jj))
        cols.append(nid(n_r - 1, jj))
        vals.append(np.full(n_a, 1.0 / dr))
        rows.append(nid(n_r - 1, jj))
        cols.append(nid(n_r - 2, jj))
        vals.append(np.full(n_a, -1.0 / dr))
        # inner ring
        if self.domain.kind == "disk":
            rows.append(nid(0, jj))
            cols.append(nid(1, jj))
            vals.append(np.full(n_a, 0.5 / dr))
            rows.append(nid(0, jj))
            cols.append(nid(0, jj + n_a // 2))
            vals.append(np.full(n_a, -0.5 / dr))
        else:
            rows.append(nid(0, jj))
            cols.append(nid(1, jj))
            vals.append(np.full(n_a, 1.0 / dr))
            rows.append(nid(0, jj))
            cols.append(nid(0, jj))
            vals.append(np.full(n_a, -1.0 / dr))
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        )
        return mat.tocsr()

    @cached_property
    def _angular_fwd_diff(self) -> sp.csr_matrix:
        """Sparse forward angular edge difference (f_{j+1} - f_j)/(r*da)."""
        n_r, n_a = self.n_r, self.n_a
        da = self.delta_a
        ii = np.repeat(np.arange(n_r), n_a)
        jj = np.tile(np.arange(n_a), n_r)
        k = ii * n_a + jj
        k_next = ii * n_a + (jj + 1) % n_a
        coef = 1.0 / (self.r_nodes[ii] * da)
        mat = sp.coo_matrix(
            (
                np.concatenate([coef, -coef]),
                (np.concatenate([k, k]), np.concatenate([k_next, k])),
            ),
            shape=(self.n_nodes, self.n_nodes),
        )
        return mat.tocsr()

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric PSD matrix A with f.A.f = integrate(grad_sq(f))."""
        W = sp.diags(self.w.ravel())
        dc = self._radial_diff
        df = self._angular_fwd_diff
        return (dc.T @ W @ dc + df.T @ W @ df).tocsr()

    @cached_property
    def h1_solve(self) -> Callable[[np.ndarray], np.ndarray]:
        """Factorized solver for (W + A), the discrete H1 metric."""
        mat = (sp.diags(self.w.ravel()) + self.stiffness).tocsc()
        return spla.factorized(mat)


@dataclass(frozen=True, eq=False)
class Field:
    """Real-valued grid function, immutable once built."""

    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(
                f"field shape {vals.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must all be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def build_polar_grid(domain: RadialDomain, n_r: int, n_a: int) -> PolarGrid:
    """Build the polar tensor mesh.

    n_a must be a positive multiple of 4 so axis reflections map nodes to
    nodes.  Recommended resolutions are n_r >= 4, n_a >= 8; smaller meshes
    (n_r >= 2, n_a >= 4) are allowed for exact small-case checks.
    """
    if n_a % 4 != 0 or n_a <= 0:
        raise ValueError("n_a must be divisible by 4")
    if n_r < 2 or n_a < 4:
        raise ValueError("grid needs n_r >= 2 and n_a >= 4")
    dr = (domain.r_outer - domain.r_inner) / n_r
    r_nodes = domain.r_inner + (np.arange(n_r) + 0.5) * dr
    a_nodes = 2.0 * math.pi * np.arange(n_a) / n_a
    da = 2.0 * math.pi / n_a
    w = np.broadcast_to((r_nodes * dr * da)[:, None], (n_r, n_a)).copy()
    for arr in (r_nodes, a_nodes, w):
        arr.setflags(write=False)
    return PolarGrid(domain=domain, n_r=n_r, n_a=n_a, r_nodes=r_nodes, a_nodes=a_nodes, w=w)


def integrate(grid: PolarGrid, f: Field) -> float:
    """Quadrature sum over all nodes; exact for constants."""
    if f.grid is not grid and f.grid.key() != grid.key():
        raise ValueError("field does not live on this grid")
    return float(np.sum(grid.w * f.values))


def _antipode(row: np.ndarray, n_a: int) -> np.ndarray:
    return np.roll(row, -(n_a // 2))


def _radial_deriv_values(grid: PolarGrid, F: np.ndarray) -> np.ndarray:
    dr = grid.delta_r
    out = np.empty_like(F)
    out[1:-1] = (F[2:] - F[:-2]) / (2.0 * dr)
    out[-1] = (F[-1] - F[-2]) / dr
    if grid.domain.kind == "disk":
        out[0] = (F[1] - _antipode(F[0], grid.n_a)) / (2.0 * dr)
    else:
        out[0] = (F[1] - F[0]) / dr
    return out


def grad_sq(grid: PolarGrid, f: Field) -> Field:
    """Pointwise squared gradient (d_r f)^2 + (d_a f)^2 / r^2.

    Radial derivative: central in the interior, one-sided at the radial
    boundaries (the natural zero-flux closure), and across the origin on
    the innermost disk ring (neighbor at angle a + pi).  Angular part:
    mean of the squared forward and backward edge differences, which is
    second-order at the node and makes the quadrature of this field the
    exact discrete Dirichlet energy.
    """
    F = f.values
    dradial = _radial_deriv_values(grid, F)
    dfwd = (np.roll(F, -1, axis=1) - F) / (grid.r_nodes[:, None] * grid.delta_a)
    gsq = dradial**2 + 0.5 * (dfwd**2 + np.roll(dfwd, 1, axis=1) ** 2)
    return Field(grid, gsq)


def dirichlet_energy(grid: PolarGrid, values: np.ndarray) -> float:
    """f.A.f, equal to integrate(grad_sq(f)) up to roundoff."""
    v = values.ravel()
    return float(v @ (grid.stiffness @ v))


def laplacian(grid: PolarGrid, values: np.ndarray) -> np.ndarray:
    """Divergence-form Laplacian: exact first variation of the Dirichlet
    energy, -(A f)/w per node."""
    return -(grid.stiffness @ values.ravel()).reshape(grid.shape) / grid.w


def _half_units(grid: PolarGrid, angle: float) -> int:
    """Express an angle as an integer count of half angular cells, or fail."""
    step = grid.delta_a / 2.0
    k = angle / step
    k_round = round(k)
    if abs(k - k_round) > 1e-9:
        raise ValueError(
            f"angle {angle} is not a multiple of half the angular spacing; "
            "the reflection would not map nodes to nodes"
        )
    return int(k_round) % (2 * grid.n_a)


def reflection_index_map(grid: PolarGrid, normal_angle: float) -> np.ndarray:
    """Angular index permutation of the reflection through the line whose
    normal is ``normal_angle`` (a -> 2*normal + pi - a).  The angle must be
    an exact multiple of half the angular spacing."""
    k2 = _half_units(grid, normal_angle)
    n_a = grid.n_a
    j = np.arange(n_a)
    return (k2 + n_a // 2 - j) % n_a


def reflect_field(f: Field, axis) -> Field:
    """Reflect a field across a line through the origin.

    axis is "x1" (reflection across the x1-axis, a -> -a), "x2" (across the
    x2-axis, a -> pi - a), an object with a ``normal_angle`` attribute, or a
    bare normal angle in radians.  Rejects reflections that do not permute
    the node set.
    """
    grid = f.grid
    n_a = grid.n_a
    j = np.arange(n_a)
    if axis == "x1":
        idx = (-j) % n_a
    elif axis == "x2":
        idx = (n_a // 2 - j) % n_a
    else:
        angle = getattr(axis, "normal_angle", axis)
        idx = reflection_index_map(grid, float(angle))
    return Field(grid, f.values[:, idx])


def rotate_field(f: Field, steps: int) -> Field:
    """Compose with the rotation by ``steps`` angular cells:
    output[i, j] = f[i, j + steps]."""
    if steps % f.grid.n_a == 0:
        return f
    return Field(f.grid, np.roll(f.values, -int(steps), axis=1))


def dump_field(f: Field) -> str:
    """Serialize as plain text: header '# n_r n_a r_inner r_outer', then one
    'r a value' line per node.  Uses shortest round-trip decimal so parsing
    recovers the exact bits."""
    grid = f.grid
    d = grid.domain
    lines = [f"# {grid.n_r} {grid.n_a} {float(d.r_inner)!r} {float(d.r_outer)!r}"]
    vals = f.values
    for i in range(grid.n_r):
        r = float(grid.r_nodes[i])
        for j in range(grid.n_a):
            lines.append(f"{r!r} {float(grid.a_nodes[j])!r} {float(vals[i, j])!r}")
    return "\n".join(lines) + "\n"


def parse_field(text: str) -> Field:
    """Inverse of dump_field."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing field header line")
    head = lines[0][1:].split()
    if len(head) != 4:
        raise ValueError("malformed field header")
    n_r, n_a = int(head[0]), int(head[1])
    r_inner, r_outer = float(head[2]), float(head[3])
    domain = disk(r_outer) if r_inner == 0.0 else annulus(r_inner, r_outer)
    grid = build_polar_grid(domain, n_r, n_a)
    body = lines[1:]
    if len(body) != n_r * n_a:
        raise ValueError(f"expected {n_r * n_a} node lines, got {len(body)}")
    vals = np.empty((n_r, n_a))
    for k, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"malformed node line: {ln!r}")
        vals[k // n_a, k % n_a] = float(parts[2])
    return Field(grid, vals)
