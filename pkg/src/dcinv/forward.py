"""Finite-volume DC resistivity forward modelling and sensitivity products.

The steady-state current-flow equation -div(sigma grad phi) = q is
discretized cell-centered on a :class:`~dcinv.mesh.TensorMesh2D` (pure 2D
physics: sources are lines perpendicular to the section).  Face
conductances use distance-weighted harmonic averaging, the surface is
zero-flux (no current leaves through the air), and the padded lateral and
bottom boundaries are homogeneous Dirichlet.  The assembled operator is
symmetric positive definite, which the adjoint-state sensitivity products
below rely on.

The model vector ``m`` is log-conductivity on all cells (padding
included); ``sigma = exp(m)``.  Sources inject a unit current (+1 at the A
electrode cell, -1 at B); a datum is ``phi[M_cell] - phi[N_cell]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolverFailure
from .mesh import TensorMesh2D
from .survey import Survey

CG_TOL = 1e-10


@dataclass(frozen=True)
class DataWeights:
    """Diagonal of the data weighting matrix, one strictly positive entry per datum."""

    values: np.ndarray
    rel: float = 0.0
    floor: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ValueError("data weights must be finite and strictly positive")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)


@dataclass(frozen=True)
class DiscreteOperator:
    """Assembled finite-volume operator in compressed sparse row form."""

    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape


class _FaceGeometry:
    """Face index arrays for one mesh, shared by assembly and sensitivities.

    Interior face f couples cells ``a[f]`` and ``b[f]`` with conductance
    ``T = length / (da/sigma_a + db/sigma_b)`` (distance-weighted harmonic
    mean over the center-to-center distance).  Dirichlet boundary face f
    couples cell ``c[f]`` to a zero ghost value: ``T = length * sigma_c /
    dc``.  The top surface contributes nothing (natural zero-flux).
    """

    def __init__(self, mesh: TensorMesh2D):
        nx, nz = mesh.nx, mesh.nz
        hx, hz = mesh.hx, mesh.hz

        ix = np.arange(nx - 1)
        iz = np.arange(nz)
        a_x = (iz[:, None] * nx + ix[None, :]).ravel()
        self.int_a = a_x
        self.int_b = a_x + 1
        self.int_len = np.broadcast_to(hz[:, None], (nz, nx - 1)).ravel().copy()
        self.int_da = np.broadcast_to(0.5 * hx[None, :-1], (nz, nx - 1)).ravel().copy()
        self.int_db = np.broadcast_to(0.5 * hx[None, 1:], (nz, nx - 1)).ravel().copy()

        ix = np.arange(nx)
        iz = np.arange(nz - 1)
        a_z = (iz[:, None] * nx + ix[None, :]).ravel()
        self.int_a = np.concatenate([self.int_a, a_z])
        self.int_b = np.concatenate([self.int_b, a_z + nx])
        self.int_len = np.concatenate([self.int_len,
                                       np.broadcast_to(hx[None, :], (nz - 1, nx)).ravel()])
        self.int_da = np.concatenate([self.int_da,
                                      np.broadcast_to(0.5 * hz[:-1, None], (nz - 1, nx)).ravel()])
        self.int_db = np.concatenate([self.int_db,
                                      np.broadcast_to(0.5 * hz[1:, None], (nz - 1, nx)).ravel()])

        # Dirichlet faces: left/right columns and bottom row.
        left = np.arange(nz) * nx
        right = left + nx - 1
        bottom = (nz - 1) * nx + np.arange(nx)
        self.bnd_c = np.concatenate([left, right, bottom])
        self.bnd_len = np.concatenate([hz, hz, hx])
        self.bnd_d = np.concatenate([np.full(nz, 0.5 * hx[0]),
                                     np.full(nz, 0.5 * hx[-1]),
                                     0.5 * hz[-1] * np.ones(nx)])

        self.n_cells = nx * nz
        # Fixed sparsity pattern: diagonal + one off-diagonal pair per interior face.
        rows = np.concatenate([self.int_a, self.int_b, self.int_a, self.int_b,
                               self.bnd_c])
        cols = np.concatenate([self.int_b, self.int_a, self.int_a, self.int_b,
                               self.bnd_c])
        self._pattern = (rows, cols)

    def conductances(self, sigma: np.ndarray):
        t_int = self.int_len / (self.int_da / sigma[self.int_a]
                                + self.int_db / sigma[self.int_b])
        t_bnd = self.bnd_len * sigma[self.bnd_c] / self.bnd_d
        return t_int, t_bnd

    def assemble(self, sigma: np.ndarray) -> sp.csr_matrix:
        t_int, t_bnd = self.conductances(sigma)
        rows, cols = self._pattern
        vals = np.concatenate([-t_int, -t_int, t_int, t_int, t_bnd])
        a = sp.coo_matrix((vals, (rows, cols)),
                          shape=(self.n_cells, self.n_cells)).tocsr()
        a.sum_duplicates()
        return a

    def conductance_derivatives(self, sigma: np.ndarray):
        """dT/dsigma_a and dT/dsigma_b per interior face, dT/dsigma_c per boundary face."""
        inv = self.int_da / sigma[self.int_a] + self.int_db / sigma[self.int_b]
        common = self.int_len / inv ** 2
        dt_da = common * self.int_da / sigma[self.int_a] ** 2
        dt_db = common * self.int_db / sigma[self.int_b] ** 2
        dt_dc = self.bnd_len / self.bnd_d
        return dt_da, dt_db, dt_dc


def _electrode_cells(mesh: TensorMesh2D, positions: np.ndarray) -> np.ndarray:
    """Flat indices of the surface cells containing the given x positions.

    A position exactly on a cell edge belongs to the cell on its right; a
    tiny nudge absorbs float noise in the edge coordinates.
    """
    edges = mesh.x_edges
    nudge = 1e-9 * mesh.hx.min()
    idx = np.searchsorted(edges, np.asarray(positions, dtype=float) + nudge) - 1
    if np.any(idx < 0) or np.any(idx >= mesh.nx):
        raise ValueError("electrode position outside the mesh")
    return idx  # surface row iz = 0, so flat index == ix


def pcg_block(a: sp.csr_matrix, b: np.ndarray, tol: float = CG_TOL,
              maxiter: int | None = None, x0: np.ndarray | None = None):
    """Jacobi-preconditioned conjugate gradients on multiple right-hand sides.

    Columns iterate independently (per-column step lengths); a column stops
    once its relative residual drops below ``tol``.  Returns (X, relative
    residuals, iterations).
    """
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    bb = b[:, None] if single else b
    n, k = bb.shape
    if maxiter is None:
        maxiter = 10 * n

    diag = a.diagonal()
    minv = 1.0 / diag

    x = np.zeros_like(bb) if x0 is None else np.array(x0, dtype=float, copy=True)
    if x.shape != bb.shape:
        raise ValueError("x0 shape mismatch")
    r = bb - a @ x
    bnorm = np.linalg.norm(bb, axis=0)
    zero_rhs = bnorm == 0.0
    x[:, zero_rhs] = 0.0
    r[:, zero_rhs] = 0.0
    scale = np.where(zero_rhs, 1.0, bnorm)

    z = minv[:, None] * r
    p = z.copy()
    rz = (r * z).sum(axis=0)
    rnorm = np.sqrt((r * r).sum(axis=0))
    active = rnorm > tol * scale
    target2 = (tol * scale) ** 2

    it = 0
    while active.any() and it < maxiter:
        cols = np.flatnonzero(active)
        all_cols = cols.size == k
        pa = p if all_cols else p[:, cols]
        qa = a @ pa
        pq = (pa * qa).sum(axis=0)
        rza = rz if all_cols else rz[cols]
        alpha = np.divide(rza, pq, out=np.zeros_like(pq), where=pq > 0)
        ra = r if all_cols else r[:, cols]
        ra -= alpha * qa
        za = minv[:, None] * ra
        rz_new = (ra * za).sum(axis=0)
        beta = np.divide(rz_new, rza, out=np.zeros_like(rz_new), where=rza > 0)
        pnew = za + beta * pa
        rr = (ra * ra).sum(axis=0)
        if all_cols:
            x += alpha * pa
            p = pnew
            rz = rz_new
            done = rr <= target2
        else:
            x[:, cols] += alpha * pa
            r[:, cols] = ra
            p[:, cols] = pnew
            rz[cols] = rz_new
            done = rr <= target2[cols]
        rnorm[cols] = np.sqrt(rr)
        active[cols] = ~done
        it += 1

    rel = rnorm / scale
    if active.any():
        worst = float(rel.max())
        raise SolverFailure(
            f"conjugate gradients stalled at relative residual {worst:.3e} "
            f"after {it} iterations", residual=worst, iterations=it)
    if single:
        return x[:, 0], float(rel[0]), it
    return x, rel, it


def assemble_system(mesh: TensorMesh2D, sigma: np.ndarray) -> DiscreteOperator:
    """Cell-centered finite-volume operator for -div(sigma grad .)."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (mesh.n_cells,):
        raise ValueError(f"sigma must have {mesh.n_cells} entries")
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("conductivities must be finite and strictly positive")
    return DiscreteOperator(matrix=_FaceGeometry(mesh).assemble(sigma))


def solve_potential(op: DiscreteOperator, q: np.ndarray, tol: float = CG_TOL,
                    maxiter: int | None = None) -> np.ndarray:
    """Solve A phi = q by preconditioned conjugate gradients."""
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("source vector must be finite")
    phi, _, _ = pcg_block(op.matrix, q, tol=tol, maxiter=maxiter)
    return phi


class DCSimulation:
    """F(m), J v and J^T v for one mesh + survey, with per-model caching.

    ``predict`` assembles the operator and solves one system per source;
    the fields are cached so sensitivity products at the same model reuse
    them.  Solves are warm-started from the previous model's fields, which
    only changes results within the solver tolerance.
    """

    def __init__(self, mesh: TensorMesh2D, survey: Survey,
                 tol: float = CG_TOL, maxiter: int | None = None):
        self.mesh = mesh
        self.survey = survey
        self.tol = tol
        self.maxiter = maxiter
        self.faces = _FaceGeometry(mesh)

        cells = _electrode_cells(mesh, survey.electrodes)
        self.src_a = np.array([cells[a] for a, _ in survey.sources])
        self.src_b = np.array([cells[b] for _, b in survey.sources])
        self.rx_m = []
        self.rx_n = []
        for rx in survey.receivers:
            self.rx_m.append(np.array([cells[m] for m, _ in rx]))
            self.rx_n.append(np.array([cells[n] for _, n in rx]))
        self.n_data = survey.n_data
        self.n_sources = survey.n_sources

        n = mesh.n_cells
        self.q = np.zeros((n, self.n_sources))
        for s in range(self.n_sources):
            self.q[self.src_a[s], s] += 1.0
            self.q[self.src_b[s], s] -= 1.0

        self._model = None
        self._matrix = None
        self._fields = None
        self._phi_warm = None
        self._lam_warm = None

    # -- caching helpers -------------------------------------------------
    def _system(self, m: np.ndarray) -> sp.csr_matrix:
        m = np.asarray(m, dtype=float)
        if m.shape != (self.mesh.n_cells,):
            raise ValueError(f"model must have {self.mesh.n_cells} entries")
        if not np.all(np.isfinite(m)):
            raise ValueError("model must be finite")
        if self._model is None or not np.array_equal(m, self._model):
            self._model = m.copy()
            self._matrix = self.faces.assemble(np.exp(m))
            self._fields = None
        return self._matrix

    def fields(self, m: np.ndarray) -> np.ndarray:
        """Potentials, one column per source, at the given model."""
        a = self._system(m)
        if self._fields is None:
            phi, _, _ = pcg_block(a, self.q, tol=self.tol, maxiter=self.maxiter,
                                  x0=self._phi_warm)
            self._fields = phi
            self._phi_warm = phi.copy()
        return self._fields

    # -- forward and sensitivities ---------------------------------------
    def predict(self, m: np.ndarray) -> np.ndarray:
        phi = self.fields(m)
        out = np.empty(self.n_data)
        k = 0
        for s in range(self.n_sources):
            ph = phi[:, s]
            nrx = self.rx_m[s].size
            out[k:k + nrx] = ph[self.rx_m[s]] - ph[self.rx_n[s]]
            k += nrx
        return out

    def _rx_transpose(self, v: np.ndarray) -> np.ndarray:
        """P^T v: scatter data-space values onto receiver cells, per source."""
        out = np.zeros((self.mesh.n_cells, self.n_sources))
        k = 0
        for s in range(self.n_sources):
            nrx = self.rx_m[s].size
            vs = v[k:k + nrx]
            np.add.at(out[:, s], self.rx_m[s], vs)
            np.add.at(out[:, s], self.rx_n[s], -vs)
            k += nrx
        return out

    def j_vec(self, m: np.ndarray, w: np.ndarray) -> np.ndarray:
        """J w: directional derivative of the data with respect to log-conductivity."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.mesh.n_cells,):
            raise ValueError("direction must be a model-space vector")
        a = self._system(m)
        phi = self.fields(m)
        sigma = np.exp(self._model)
        dsigma = sigma * w

        f = self.faces
        dt_da, dt_db, dt_dc = f.conductance_derivatives(sigma)
        dt_int = dt_da * dsigma[f.int_a] + dt_db * dsigma[f.int_b]
        dt_bnd = dt_dc * dsigma[f.bnd_c]

        # rhs = -(dA) phi per source
        du = phi[f.int_a, :] - phi[f.int_b, :]
        rhs = np.zeros_like(phi)
        contrib = dt_int[:, None] * du
        np.add.at(rhs, f.int_a, -contrib)
        np.add.at(rhs, f.int_b, contrib)
        np.add.at(rhs, f.bnd_c, -dt_bnd[:, None] * phi[f.bnd_c, :])

        dphi, _, _ = pcg_block(a, rhs, tol=self.tol, maxiter=self.maxiter)
        out = np.empty(self.n_data)
        k = 0
        for s in range(self.n_sources):
            ph = dphi[:, s]
            nrx = self.rx_m[s].size
            out[k:k + nrx] = ph[self.rx_m[s]] - ph[self.rx_n[s]]
            k += nrx
        return out

    def jt_vec(self, m: np.ndarray, v: np.ndarray) -> np.ndarray:
        """J^T v by the adjoint-state method: one extra solve per source."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_data,):
            raise ValueError("v must be a data-space vector")
        a = self._system(m)
        phi = self.fields(m)
        sigma = np.exp(self._model)

        rhs = -self._rx_transpose(v)
        lam, _, _ = pcg_block(a, rhs, tol=self.tol, maxiter=self.maxiter,
                              x0=self._lam_warm)
        self._lam_warm = lam.copy()

        f = self.faces
        dt_da, dt_db, dt_dc = f.conductance_derivatives(sigma)
        # lambda^T (dA/dsigma_c u) summed over sources, per face then per cell
        du = phi[f.int_a, :] - phi[f.int_b, :]
        dl = lam[f.int_a, :] - lam[f.int_b, :]
        face_form = np.einsum("fs,fs->f", du, dl)
        bnd_form = np.einsum("fs,fs->f", phi[f.bnd_c, :], lam[f.bnd_c, :])

        grad_sigma = np.zeros(self.mesh.n_cells)
        np.add.at(grad_sigma, f.int_a, dt_da * face_form)
        np.add.at(grad_sigma, f.int_b, dt_db * face_form)
        np.add.at(grad_sigma, f.bnd_c, dt_dc * bnd_form)
        return grad_sigma * sigma


def predict(mesh: TensorMesh2D, survey: Survey, m: np.ndarray,
            tol: float = CG_TOL) -> np.ndarray:
    """F(m): predicted potential differences, in survey order."""
    return DCSimulation(mesh, survey, tol=tol).predict(np.asarray(m, dtype=float))


def j_vec(mesh: TensorMesh2D, survey: Survey, m: np.ndarray, w: np.ndarray,
          tol: float = CG_TOL) -> np.ndarray:
    return DCSimulation(mesh, survey, tol=tol).j_vec(np.asarray(m, dtype=float), w)


def jt_vec(mesh: TensorMesh2D, survey: Survey, m: np.ndarray, v: np.ndarray,
           tol: float = CG_TOL) -> np.ndarray:
    return DCSimulation(mesh, survey, tol=tol).jt_vec(np.asarray(m, dtype=float), v)


def build_data_weights(d_obs: np.ndarray, rel: float, floor: float) -> DataWeights:
    """W_d diagonal: 1 / (rel * |d| + floor) per datum."""
    d_obs = np.asarray(d_obs, dtype=float)
    if rel < 0 or floor < 0 or (rel == 0 and floor == 0):
        raise ValueError("need rel >= 0, floor >= 0, not both zero")
    denom = rel * np.abs(d_obs) + floor
    if np.any(denom == 0):
        raise ValueError("zero uncertainty for a datum; use a positive floor")
    return DataWeights(values=1.0 / denom, rel=rel, floor=floor)


def weights_from_std(std: np.ndarray, floor: float = 0.0) -> DataWeights:
    """W_d from per-datum standard deviations (optionally floored)."""
    std = np.asarray(std, dtype=float)
    denom = np.maximum(std, floor)
    if np.any(denom <= 0):
        raise ValueError("standard deviations must be positive (or provide a floor)")
    return DataWeights(values=1.0 / denom, rel=0.0, floor=floor)


def phi_d(d_pred: np.ndarray, d_obs: np.ndarray, weights: DataWeights) -> float:
    """Data misfit 0.5 * || W_d (d_pred - d_obs) ||^2."""
    d_pred = np.asarray(d_pred, dtype=float)
    d_obs = np.asarray(d_obs, dtype=float)
    if d_pred.shape != d_obs.shape or d_pred.shape != weights.values.shape:
        raise ValueError("data vectors and weights must have equal length")
    r = weights.values * (d_pred - d_obs)
    return 0.5 * float(r @ r)
