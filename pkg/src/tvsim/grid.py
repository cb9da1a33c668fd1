"""Uniform rectangular grid, discrete operators and sparse SPD solves.

The domain is the rectangle [0, Lx] x [0, Ly] with nodes at the tensor
lattice x_i = i*hx, y_j = j*hy.  Scalar fields have shape (ny, nx), vector
fields (ny, nx, 2) and symmetric-matrix fields (ny, nx, 3) in the component
order (a11, a22, a12).

The first-derivative stencils are centered in the interior with one-sided
closures at the boundary, matched to the trapezoid quadrature weights so that
summation by parts is exact: for every field w vanishing on the boundary,

    sum <A, sym_grad(w)> W  +  sum div_matrix(A) . w W  =  0

holds to rounding, and sum over the grid of any sym_grad component of such a
w vanishes identically.  These two identities are what make the discrete
energy and entropy exchange terms cancel exactly rather than to O(h^2).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, SolverError

SNAPSHOT_MAGIC = b"TVS1"
_HEADER = struct.Struct("<4sIIId8x")  # magic, nx, ny, nfields, time, pad to 32
assert _HEADER.size == 32


def _sbp_derivative_1d(n, h):
    """First derivative: centered inside, first-order one-sided at the ends.

    With the trapezoid weights p = h*(1/2, 1, ..., 1, 1/2) this operator D
    satisfies the exact summation-by-parts relation P D + D^T P = B where B
    carries only boundary entries, which is what the discrete integration by
    parts below relies on.
    """
    d = sp.lil_matrix((n, n))
    d[0, 0], d[0, 1] = -1.0 / h, 1.0 / h
    d[n - 1, n - 2], d[n - 1, n - 1] = -1.0 / h, 1.0 / h
    inv2h = 0.5 / h
    for i in range(1, n - 1):
        d[i, i - 1] = -inv2h
        d[i, i + 1] = inv2h
    return d.tocsr()


def _neumann_laplacian_1d(n, h):
    """Second derivative with mirror ghost nodes (zero normal derivative)."""
    lap = sp.lil_matrix((n, n))
    inv_h2 = 1.0 / h**2
    lap[0, 0], lap[0, 1] = -2.0 * inv_h2, 2.0 * inv_h2
    lap[n - 1, n - 2], lap[n - 1, n - 1] = 2.0 * inv_h2, -2.0 * inv_h2
    for i in range(1, n - 1):
        lap[i, i - 1] = inv_h2
        lap[i, i] = -2.0 * inv_h2
        lap[i, i + 1] = inv_h2
    return lap.tocsr()


def _dirichlet_laplacian_1d(n_int, h):
    """Standard second difference acting on interior values (zero boundary)."""
    main = np.full(n_int, -2.0 / h**2)
    off = np.full(n_int - 1, 1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1]).tocsr()


def _trapezoid_1d(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass
class Grid:
    """Uniform nx x ny node grid on [0, Lx] x [0, Ly]."""

    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0
    _ops: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ConfigError("grid needs at least 4 nodes per direction")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ConfigError("grid needs positive side lengths")
        self.hx = self.Lx / (self.nx - 1)
        self.hy = self.Ly / (self.ny - 1)
        self.x = np.linspace(0.0, self.Lx, self.nx)
        self.y = np.linspace(0.0, self.Ly, self.ny)
        self.X, self.Y = np.meshgrid(self.x, self.y)
        self.n_nodes = self.nx * self.ny
        wx = _trapezoid_1d(self.nx, self.hx)
        wy = _trapezoid_1d(self.ny, self.hy)
        self.weights = np.outer(wy, wx)
        mask = np.zeros((self.ny, self.nx), dtype=bool)
        mask[1:-1, 1:-1] = True
        self.interior_mask = mask
        self.boundary_mask = ~mask
        self.interior_idx = np.flatnonzero(mask.ravel())
        self.area = self.Lx * self.Ly

    # -- pointwise field operations (vectorized stencils) ----------------
    def d_x(self, f):
        out = np.empty_like(f)
        out[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * self.hx)
        out[:, 0] = (f[:, 1] - f[:, 0]) / self.hx
        out[:, -1] = (f[:, -1] - f[:, -2]) / self.hx
        return out

    def d_y(self, f):
        out = np.empty_like(f)
        out[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2.0 * self.hy)
        out[0, :] = (f[1, :] - f[0, :]) / self.hy
        out[-1, :] = (f[-1, :] - f[-2, :]) / self.hy
        return out

    def grad(self, f):
        """Nodal gradient of a scalar field, shape (ny, nx, 2)."""
        return np.stack([self.d_x(f), self.d_y(f)], axis=-1)

    def sym_grad(self, v):
        """Symmetric gradient of a vector field, components (a11, a22, a12)."""
        e11 = self.d_x(v[..., 0])
        e22 = self.d_y(v[..., 1])
        e12 = 0.5 * (self.d_y(v[..., 0]) + self.d_x(v[..., 1]))
        return np.stack([e11, e22, e12], axis=-1)

    def laplacian_neumann(self, f):
        """Five-point Laplacian with mirror ghosts (zero normal derivative)."""
        out = np.zeros_like(f)
        ihx2, ihy2 = 1.0 / self.hx**2, 1.0 / self.hy**2
        out[:, 1:-1] += (f[:, 2:] - 2.0 * f[:, 1:-1] + f[:, :-2]) * ihx2
        out[:, 0] += 2.0 * (f[:, 1] - f[:, 0]) * ihx2
        out[:, -1] += 2.0 * (f[:, -2] - f[:, -1]) * ihx2
        out[1:-1, :] += (f[2:, :] - 2.0 * f[1:-1, :] + f[:-2, :]) * ihy2
        out[0, :] += 2.0 * (f[1, :] - f[0, :]) * ihy2
        out[-1, :] += 2.0 * (f[-2, :] - f[-1, :]) * ihy2
        return out

    def integrate(self, f):
        """Trapezoid quadrature of a scalar field."""
        return float(np.sum(self.weights * f))

    def div_matrix(self, a):
        """Negative quadrature adjoint of sym_grad, zero on boundary nodes.

        Defined so that integrate(<A, sym_grad w>) + integrate(div(A) . w) = 0
        exactly for every w vanishing on the boundary; at interior nodes it
        coincides with the centered-difference divergence of A.
        """
        out = self.divop() @ self._mat_flat(a)
        return self._vec_unflat(out)

    # -- flatteners -------------------------------------------------------
    def _vec_flat(self, v):
        return np.concatenate([v[..., 0].ravel(), v[..., 1].ravel()])

    def _vec_unflat(self, flat):
        n = self.n_nodes
        return np.stack([flat[:n].reshape(self.ny, self.nx),
                         flat[n:].reshape(self.ny, self.nx)], axis=-1)

    def _mat_flat(self, a):
        return np.concatenate([a[..., k].ravel() for k in range(3)])

    def _scalar_flat(self, f):
        return f.ravel()

    def interior_vec(self, v):
        """Interior degrees of freedom of a vector field (component-major)."""
        n = self.n_nodes
        return self._vec_flat(v)[np.concatenate([self.interior_idx,
                                                 self.interior_idx + n])]

    def vec_from_interior(self, flat_int):
        """Zero-extend interior vector dof back to the full grid."""
        out = np.zeros(2 * self.n_nodes)
        n = self.n_nodes
        ni = self.interior_idx.size
        out[self.interior_idx] = flat_int[:ni]
        out[self.interior_idx + n] = flat_int[ni:]
        return self._vec_unflat(out)

    # -- assembled sparse operators (cached) ------------------------------
    def _op(self, key, builder):
        if key not in self._ops:
            self._ops[key] = builder()
        return self._ops[key]

    def Dx(self):
        return self._op("Dx", lambda: sp.kron(sp.identity(self.ny, format="csr"),
                                              _sbp_derivative_1d(self.nx, self.hx),
                                              format="csr"))

    def Dy(self):
        return self._op("Dy", lambda: sp.kron(_sbp_derivative_1d(self.ny, self.hy),
                                              sp.identity(self.nx, format="csr"),
                                              format="csr"))

    def G(self):
        """Symmetric-gradient matrix: (vx, vy) dof -> (a11, a22, a12) dof."""
        def build():
            dx, dy = self.Dx(), self.Dy()
            zero = sp.csr_matrix(dx.shape)
            return sp.bmat([[dx, zero], [zero, dy], [0.5 * dy, 0.5 * dx]],
                           format="csr")
        return self._op("G", build)

    def mat_weight_diag(self):
        """Quadrature weights for matrix fields: (w, w, 2w) per component."""
        w = self.weights.ravel()
        return self._op("Wmat", lambda: sp.diags(np.concatenate([w, w, 2.0 * w])))

    def divop(self):
        def build():
            w = self.weights.ravel()
            inv_w = sp.diags(np.concatenate([1.0 / w, 1.0 / w]))
            op = (-inv_w) @ self.G().T @ self.mat_weight_diag()
            keep = np.zeros(2 * self.n_nodes)
            keep[self.interior_idx] = 1.0
            keep[self.interior_idx + self.n_nodes] = 1.0
            return (sp.diags(keep) @ op).tocsr()
        return self._op("div", build)

    def quadratic_form_matrix(self, comp_matrix):
        """A = G^T [M (x) diag(w)] G for a 3x3 component matrix M.

        Gives v . A v = integrate(<T: sym_grad v, sym_grad v>) exactly, where
        M is the component matrix of the 4th-order tensor T.
        """
        w = sp.diags(self.weights.ravel())
        middle = sp.bmat([[comp_matrix[a, b] * w for b in range(3)] for a in range(3)],
                         format="csr")
        g = self.G()
        return (g.T @ middle @ g).tocsr()

    def interior_submatrix(self, a):
        idx = np.concatenate([self.interior_idx, self.interior_idx + self.n_nodes])
        return a[idx][:, idx].tocsr()

    def coupling_force_matrix(self, b_triple):
        """T_B: nodal theta -> interior force dof of -div(theta * B).

        Built as G^T W_mat applied to theta x B, so that
        v . T_B theta = integrate(theta * <B, sym_grad v>) exactly.
        """
        w = sp.diags(self.weights.ravel())
        stack = sp.bmat([[b_triple[0] * w], [b_triple[1] * w], [2.0 * b_triple[2] * w]],
                        format="csr")
        full = (self.G().T @ stack).tocsr()
        idx = np.concatenate([self.interior_idx, self.interior_idx + self.n_nodes])
        return full[idx].tocsr()

    def neumann_weighted(self):
        """W * Laplacian_N: symmetric negative semidefinite, zero row sums."""
        def build():
            px = sp.diags(_trapezoid_1d(self.nx, self.hx))
            py = sp.diags(_trapezoid_1d(self.ny, self.hy))
            lx = _neumann_laplacian_1d(self.nx, self.hx)
            ly = _neumann_laplacian_1d(self.ny, self.hy)
            a = sp.kron(py, px @ lx) + sp.kron(py @ ly, px)
            return a.tocsr()
        return self._op("AN", build)

    def dirichlet_laplacian_interior(self):
        """Five-point -free Laplacian on interior scalar dof (clamped boundary)."""
        def build():
            lx = _dirichlet_laplacian_1d(self.nx - 2, self.hx)
            ly = _dirichlet_laplacian_1d(self.ny - 2, self.hy)
            ix = sp.identity(self.nx - 2, format="csr")
            iy = sp.identity(self.ny - 2, format="csr")
            return (sp.kron(iy, lx) + sp.kron(ly, ix)).tocsr()
        return self._op("Ldir", build)


def solve_spd(a, rhs, tol=1e-10, maxiter=None, x0=None, precond_diag=None,
              precond_apply=None):
    """Preconditioned conjugate gradients for a sparse SPD system.

    Stops at relative residual <= tol; the iteration cap defaults to 10 times
    the number of unknowns, and failure raises SolverError with the final
    residual attached.  The preconditioner is either a diagonal
    (precond_diag) or a callable applying an SPD approximate inverse
    (precond_apply); convergence is always measured on the true residual.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    if maxiter is None:
        maxiter = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = rhs - a @ x
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros(n), 0
    if precond_apply is not None:
        apply_m = precond_apply
    elif precond_diag is not None:
        inv_diag = 1.0 / precond_diag
        apply_m = lambda v: inv_diag * v
    else:
        apply_m = lambda v: v
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    rnorm = float(np.linalg.norm(r))
    it = 0
    while rnorm > tol * bnorm:
        if it >= maxiter:
            raise SolverError(
                f"conjugate gradients stalled at relative residual {rnorm / bnorm:.3e} "
                f"after {it} iterations", residual=rnorm / bnorm, iterations=it)
        ap = a @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rnorm = float(np.linalg.norm(r))
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it


def korn_quotients(grid, comp_matrix, n_samples=100, seed=0):
    """Rayleigh quotients of the elastic form against the full gradient.

    For boundary-clamped random fields w returns the sampled values of
    integrate(<C: sym_grad w, sym_grad w>) / integrate(|grad w|^2), whose
    positive infimum is the discrete Korn-type coercivity constant.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    for k in range(n_samples):
        w = np.zeros((grid.ny, grid.nx, 2))
        w[1:-1, 1:-1, :] = rng.standard_normal((grid.ny - 2, grid.nx - 2, 2))
        e = grid.sym_grad(w)
        num = grid.integrate(np.einsum("ab,ija,ijb->ij", comp_matrix, e, e))
        gx0 = grid.grad(w[..., 0])
        gx1 = grid.grad(w[..., 1])
        den = grid.integrate(gx0[..., 0] ** 2 + gx0[..., 1] ** 2
                             + gx1[..., 0] ** 2 + gx1[..., 1] ** 2)
        out[k] = num / den
    return out


def poincare_korn_quotients(grid, n_samples=100, seed=0):
    """Sampled L1 quotients integrate(|w|) / integrate(|sym_grad w|).

    Boundedness of these ratios is the discrete counterpart of the
    Poincare-Korn inequality for boundary-clamped fields.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    for k in range(n_samples):
        w = np.zeros((grid.ny, grid.nx, 2))
        w[1:-1, 1:-1, :] = rng.standard_normal((grid.ny - 2, grid.nx - 2, 2))
        e = grid.sym_grad(w)
        mag = np.sqrt(e[..., 0] ** 2 + e[..., 1] ** 2 + 2.0 * e[..., 2] ** 2)
        num = grid.integrate(np.sqrt(w[..., 0] ** 2 + w[..., 1] ** 2))
        out[k] = num / grid.integrate(mag)
    return out


def write_snapshot(path, t, fields):
    """Write fields (list of (ny, nx) float arrays) with the 32-byte header."""
    ny, nx = fields[0].shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, nx, ny, len(fields), float(t)))
        for f in fields:
            if f.shape != (ny, nx):
                raise ConfigError("snapshot fields must share one grid shape")
            fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())


def read_snapshot(path):
    """Read a snapshot file; returns (t, [fields])."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, nx, ny, nfields, t = _HEADER.unpack(header)
        if magic != SNAPSHOT_MAGIC:
            raise ConfigError(f"{path}: not a snapshot file (bad magic {magic!r})")
        fields = []
        for _ in range(nfields):
            buf = fh.read(8 * nx * ny)
            arr = np.frombuffer(buf, dtype="<f8").reshape(ny, nx).copy()
            fields.append(arr)
    return t, fields
