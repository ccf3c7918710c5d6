"""Stabilized space-time FEM for 2D flow on deforming snapped meshes.

Each time slab spans the domain between two snapped node layouts,
coords_n at the slab bottom and coords_n1 at the top.  Fields carry one
unknown level, the slab top; the bottom trace is the previous top and
enters through a jump term, so mesh motion is accounted for purely by
the slab geometry.  Nodes travel on straight lines inside a slab, and
with nodal values held constant over the slab the time derivative at a
fixed spatial point reduces to minus the mesh-velocity convection, which
the quadrature picks up automatically.

Momentum and continuity are stabilized with a GLS term whose test
operator carries both the advective part and the pressure-gradient
part, plus a grad-div term; equal-order linear triangles are used for
velocity and pressure.  The heat equation gets the matching SUPG term
and a viscous dissipation source.  Second-derivative terms vanish for
linear elements and are dropped inside the stabilization operators.

The nonlinear slab systems are solved with Newton's method.  Viscosity
is evaluated at the current iterate but not differentiated (Picard
lagging); every other term, including the stabilization parameters, is
differentiated exactly, so Newtonian Jacobians are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from screwsim.materials import (
    CrossWLF,
    MaterialModel,
    Newtonian,
    conductivity,
    dissipation,
    viscosity,
)
from screwsim.srmum import MeshError, SrmumAssembly, snap


class NonConvergenceError(RuntimeError):
    """Raised when Newton or coupling iterations fail to converge."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


# ---------------------------------------------------------------------------
# state and boundary conditions
# ---------------------------------------------------------------------------

@dataclass
class SimState:
    """Fields and geometry of one space-time slab.

    coords_n / coords_n1 are the snapped node positions at the slab
    bottom and top; u, p (and optionally T) hold the bottom trace
    before a solve and the new top level afterwards.  regions maps
    boundary tags to node index arrays; boundary_edges lists directed
    boundary edges (domain on the left).
    """

    t: float
    rotation: float
    dt: float
    coords_n: np.ndarray
    coords_n1: np.ndarray
    tris: np.ndarray
    u: np.ndarray
    p: np.ndarray
    T: np.ndarray | None = None
    regions: dict = field(default_factory=dict)
    boundary_edges: np.ndarray | None = None

    def __post_init__(self):
        n = self.coords_n.shape[0]
        if self.coords_n1.shape != self.coords_n.shape:
            raise ValueError("slab bottom and top must share the node set")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.u.shape != (n, 2) or self.p.shape != (n,):
            raise ValueError("field shapes must match the node count")
        if self.T is not None and self.T.shape != (n,):
            raise ValueError("temperature shape must match the node count")

    @property
    def n_nodes(self) -> int:
        return self.coords_n.shape[0]


@dataclass(frozen=True)
class BoundaryCondition:
    """One condition on a tagged boundary region.

    region  one of the tags in SimState.regions ('left_screw',
            'right_screw', 'barrel') or an explicit node index array
    kind    'velocity' | 'traction' | 'temperature' | 'heat-flux'
    value   constant (scalar or vector) or callable(points) -> values,
            evaluated at slab-top node or quadrature positions
    """

    region: object
    kind: str
    value: object

    def __post_init__(self):
        if self.kind not in ("velocity", "traction",
                             "temperature", "heat-flux"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")


def boundary_velocity(point, screw_center, omega: float) -> np.ndarray:
    """Rigid-rotation velocity omega x (point - center) in 2D."""
    r = np.asarray(point, dtype=float) - np.asarray(screw_center, dtype=float)
    out = np.empty_like(r)
    out[..., 0] = -omega * r[..., 1]
    out[..., 1] = omega * r[..., 0]
    return out


def _region_indices(state: SimState, region) -> np.ndarray:
    if isinstance(region, str):
        try:
            return state.regions[region]
        except KeyError:
            raise ValueError(f"unknown boundary region {region!r}") from None
    return np.asarray(region, dtype=np.int64)


def _eval_bc(bc: BoundaryCondition, points: np.ndarray, width: int):
    if callable(bc.value):
        vals = np.asarray(bc.value(points), dtype=float)
    else:
        vals = np.asarray(bc.value, dtype=float)
    shape = (points.shape[0], width) if width > 1 else (points.shape[0],)
    return np.broadcast_to(vals, shape)


def _boundary_edges(quads: np.ndarray) -> np.ndarray:
    """Directed boundary edges of a CCW quad mesh, domain on the left."""
    e = np.concatenate([quads[:, [0, 1]], quads[:, [1, 2]],
                        quads[:, [2, 3]], quads[:, [3, 0]]])
    fwd = set(map(tuple, e.tolist()))
    out = [edge for edge in e.tolist() if (edge[1], edge[0]) not in fwd]
    return np.asarray(out, dtype=np.int64)


def initial_state(asm: SrmumAssembly, orientation: float, dt: float,
                  T0=None, freeze_mesh: bool = False) -> SimState:
    """Rest state on a just-snapped mesh, ready for the first slab.

    The first slab bottom equals the initial condition; coords_n1 is
    set equal to coords_n until advance() rotates the screws.
    """
    coords = snap(asm, orientation)
    n = coords.shape[0]
    regions = {"barrel": asm.wall_nodes.copy(),
               "left_screw": asm.screw_nodes[0].copy()}
    if asm.twin:
        regions["right_screw"] = asm.screw_nodes[1].copy()
    temp = None
    if T0 is not None:
        temp = np.broadcast_to(np.asarray(T0, dtype=float), (n,)).copy()
    del freeze_mesh  # geometry handling is advance()'s business
    return SimState(
        t=0.0, rotation=orientation, dt=dt,
        coords_n=coords, coords_n1=coords.copy(), tris=asm.tris.copy(),
        u=np.zeros((n, 2)), p=np.zeros(n), T=temp,
        regions=regions, boundary_edges=_boundary_edges(asm.quads))


# ---------------------------------------------------------------------------
# stabilization parameters
# ---------------------------------------------------------------------------

def stab_taus(h, speed, nu, dt, alpha=None):
    """Stabilization parameters (tau_mom, tau_cont, tau_temp).

    tau_mom combines the transient, advective and diffusive element
    scales in inverse quadrature; tau_cont switches from its advective
    value to a Reynolds-scaled one below Re_elem = 3; tau_temp has the
    tau_mom form with the thermal diffusivity.  tau_temp is None unless
    alpha is given.
    """
    h = np.asarray(h, dtype=float)
    speed = np.asarray(speed, dtype=float)
    nu = np.asarray(nu, dtype=float)
    tau_mom = ((2.0 / dt) ** 2 + (2.0 * speed / h) ** 2
               + (4.0 * nu / h ** 2) ** 2) ** -0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        re = speed * h / (2.0 * nu)
        re = np.where(np.isfinite(re), re, np.inf)
    tau_cont = (h * speed / 2.0) * np.minimum(1.0, re / 3.0)
    tau_cont = np.where(speed > 0.0, tau_cont, 0.0)
    tau_temp = None
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=float)
        tau_temp = ((2.0 / dt) ** 2 + (2.0 * speed / h) ** 2
                    + (4.0 * alpha / h ** 2) ** 2) ** -0.5
    return tau_mom, tau_cont, tau_temp


# ---------------------------------------------------------------------------
# element kitchen
# ---------------------------------------------------------------------------

# 2-point Gauss on (0,1) for the slab time axis
_TIME_Q = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))
# 3-point second-order rule on the reference triangle
_SPACE_Q = np.array([[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                     [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                     [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]])
_I2 = np.eye(2)


def _tri_grads(x: np.ndarray):
    """detJ (twice the area) and P1 shape gradients for (M, 3, 2) coords."""
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g = np.empty(x.shape)
    g[:, 1, 0] = d2[:, 1] / det
    g[:, 1, 1] = -d2[:, 0] / det
    g[:, 2, 0] = -d1[:, 1] / det
    g[:, 2, 1] = d1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]
    return det, g


@dataclass
class SlabSystem:
    """Assembled residual and Jacobian of one slab in solver dof order."""

    residual: np.ndarray
    jacobian: sp.csr_matrix
    fixed: np.ndarray
    meta: dict = field(default_factory=dict)


def _dirichlet_velocity(state: SimState, bcs) -> tuple:
    """Velocity Dirichlet dof indices and values at the slab top."""
    idx, val = [], []
    covered = []
    for bc in bcs:
        if bc.kind != "velocity":
            continue
        nodes = _region_indices(state, bc.region)
        vals = _eval_bc(bc, state.coords_n1[nodes], 2)
        idx.append(np.stack([2 * nodes, 2 * nodes + 1], axis=1).ravel())
        val.append(np.asarray(vals, dtype=float).ravel())
        covered.append(nodes)
    if idx:
        return (np.concatenate(idx), np.concatenate(val),
                np.concatenate(covered))
    return (np.empty(0, dtype=np.int64), np.empty(0),
            np.empty(0, dtype=np.int64))


def _check_velocity_coverage(state: SimState, bcs, covered: np.ndarray):
    if state.boundary_edges is None:
        return
    bnodes = np.unique(state.boundary_edges)
    traction_nodes = [np.empty(0, dtype=np.int64)]
    for bc in bcs:
        if bc.kind == "traction":
            traction_nodes.append(_region_indices(state, bc.region))
    ok = np.zeros(state.n_nodes, dtype=bool)
    ok[covered] = True
    ok[np.concatenate(traction_nodes)] = True
    missing = bnodes[~ok[bnodes]]
    if missing.size:
        raise ValueError(
            f"{missing.size} boundary nodes lack a velocity or traction "
            f"condition (first: node {int(missing[0])})")


def _edge_load(state: SimState, bcs, kinds, width) -> np.ndarray:
    """Space-time boundary integral of prescribed traction or flux."""
    load = np.zeros((state.n_nodes, width))
    active = [bc for bc in bcs if bc.kind in kinds]
    if not active or state.boundary_edges is None:
        return load
    for bc in active:
        nodes = _region_indices(state, bc.region)
        mask = np.zeros(state.n_nodes, dtype=bool)
        mask[nodes] = True
        edges = state.boundary_edges[
            mask[state.boundary_edges].all(axis=1)]
        if edges.size == 0:
            continue
        for th in _TIME_Q:
            x = (1.0 - th) * state.coords_n + th * state.coords_n1
            pa, pb = x[edges[:, 0]], x[edges[:, 1]]
            length = np.linalg.norm(pb - pa, axis=1)
            for s, wa in ((0.5 - 0.5 / math.sqrt(3.0), None),
                          (0.5 + 0.5 / math.sqrt(3.0), None)):
                pts = (1.0 - s) * pa + s * pb
                vals = _eval_bc(bc, pts, width)
                if width == 1:
                    vals = vals[:, None]
                w = 0.25 * state.dt * length  # dt/2 time x 1/2 space
                np.add.at(load, edges[:, 0],
                          (1.0 - s) * w[:, None] * vals)
                np.add.at(load, edges[:, 1], s * w[:, None] * vals)
    return load


def _viscosity_at(material: MaterialModel, gdot, temp):
    v = material.variant
    if isinstance(v, CrossWLF):
        return viscosity(material, gdot, temp)
    return viscosity(material, gdot)


def assemble_flow_slab(state: SimState, material: MaterialModel, bcs,
                       u=None, p=None, pin_pressure: int | None = 0):
    """Residual and Jacobian of the flow slab at iterate (u, p).

    u, p default to the state fields (Newton initial guess).  The
    bottom trace is state.u; the mesh moves linearly from coords_n to
    coords_n1.  Dirichlet rows are replaced by identity; with no
    traction condition the pressure of node pin_pressure is pinned to
    zero to fix the hydrostatic gauge.
    """
    n = state.n_nodes
    uu = state.u if u is None else np.asarray(u, dtype=float)
    pp = state.p if p is None else np.asarray(p, dtype=float)
    tris = state.tris
    m = tris.shape[0]
    rho = material.rho
    dt = state.dt

    x0 = state.coords_n[tris]
    x1 = state.coords_n1[tris]
    vm_e = (x1 - x0) / dt
    ue = uu[tris]
    pe = pp[tris]
    ub_e = state.u[tris]
    te = None
    if state.T is not None:
        te = state.T[tris]

    det0, _ = _tri_grads(x0)
    if np.any(det0 <= 0.0):
        raise MeshError("inverted space-time element at the slab bottom")

    r_u = np.zeros((m, 3, 2))
    r_p = np.zeros((m, 3))
    k_uu = np.zeros((m, 3, 2, 3, 2))
    k_up = np.zeros((m, 3, 2, 3))
    k_pu = np.zeros((m, 3, 3, 2))
    k_pp = np.zeros((m, 3, 3))

    # jump term on the slab bottom
    for sq in range(3):
        nq = _SPACE_Q[sq]
        wt = det0 / 6.0
        du = np.einsum("a,mai->mi", nq, ue - ub_e)
        r_u += rho * np.einsum("m,a,mi->mai", wt, nq, du)
        k_uu += rho * np.einsum("m,a,b,ij->maibj", wt, nq, nq, _I2)

    for th in _TIME_Q:
        x = (1.0 - th) * x0 + th * x1
        det, g = _tri_grads(x)
        if np.any(det <= 0.0):
            raise MeshError("inverted space-time element inside the slab")
        h = np.sqrt(det)  # sqrt(2A) element length scale
        gradu = np.einsum("mai,maj->mij", ue, g)
        divu = gradu[:, 0, 0] + gradu[:, 1, 1]
        gradp = np.einsum("ma,mai->mi", pe, g)
        eps = 0.5 * (gradu + np.swapaxes(gradu, 1, 2))
        gdot = np.sqrt(2.0 * np.einsum("mij,mij->m", eps, eps))

        for sq in range(3):
            nq = _SPACE_Q[sq]
            wt = (0.5 * dt) * (det / 6.0)
            uq = np.einsum("a,mai->mi", nq, ue)
            vmq = np.einsum("a,mai->mi", nq, vm_e)
            c = uq - vmq
            spd = np.linalg.norm(c, axis=1)
            if te is not None:
                tq = te @ nq
            else:
                tq = None
            eta = np.asarray(_viscosity_at(material, gdot, tq), dtype=float)
            nu = eta / rho

            tau_m = ((2.0 / dt) ** 2 + (2.0 * spd / h) ** 2
                     + (4.0 * nu / h ** 2) ** 2) ** -0.5
            with np.errstate(divide="ignore", invalid="ignore"):
                re = spd * h / (2.0 * nu)
                re = np.where(np.isfinite(re), re, np.inf)
            adv_branch = re >= 3.0
            tau_c = np.where(adv_branch, h * spd / 2.0,
                             h ** 2 * spd ** 2 / (12.0 * nu))

            cg = np.einsum("mi,mai->ma", c, g)          # (c . grad N_a)
            cgu = np.einsum("mj,mij->mi", c, gradu)     # (c . grad) u
            ls = rho * cgu + gradp                      # strong residual
            gab = np.einsum("mak,mbk->mab", g, g)

            # Galerkin terms
            r_u += np.einsum("m,a,mi->mai", wt * rho, nq, cgu)
            r_u += np.einsum("m,mil,mal->mai", wt * 2.0 * eta, eps, g)
            r_u -= np.einsum("m,mai->mai", wt * (pe @ nq), g)
            r_p += np.einsum("m,a->ma", wt * divu, nq)

            # GLS momentum / pressure and grad-div
            r_u += np.einsum("m,ma,mi->mai", wt * tau_m, cg, ls)
            r_p += np.einsum("m,mai,mi->ma", wt * tau_m / rho, g, ls)
            r_u += np.einsum("m,mai->mai", wt * tau_c * rho * divu, g)

            # Jacobian: advection
            k_uu += np.einsum("m,a,b,mij->maibj", wt * rho, nq, nq, gradu)
            k_uu += np.einsum("m,a,mb,ij->maibj", wt * rho, nq, cg, _I2)
            # viscous (eta lagged)
            k_uu += np.einsum("m,mab,ij->maibj", wt * eta, gab, _I2)
            k_uu += np.einsum("m,maj,mbi->maibj", wt * eta, g, g)
            # pressure and continuity
            k_up -= np.einsum("m,mai,b->maib", wt, g, nq)
            k_pu += np.einsum("m,a,mbj->mabj", wt, nq, g)

            # stabilization derivatives
            dtau_m = -(tau_m ** 3) * (4.0 / h ** 2)     # x d|c|^2/dU
            dls_u = rho * (np.einsum("b,mij->mbij", nq, gradu)
                           + np.einsum("mb,ij->mbij", cg, _I2))
            # GLS momentum rows
            k_uu += np.einsum("m,b,mj,ma,mi->maibj", wt * dtau_m,
                              nq, c, cg, ls)
            k_uu += np.einsum("m,b,maj,mi->maibj", wt * tau_m, nq, g, ls)
            k_uu += np.einsum("m,ma,mbij->maibj", wt * tau_m, cg, dls_u)
            k_up += np.einsum("m,ma,mbi->maib", wt * tau_m, cg, g)
            # GLS pressure rows
            k_pu += np.einsum("m,b,mj,ma->mabj", wt * dtau_m / rho, nq, c,
                              np.einsum("mai,mi->ma", g, ls))
            k_pu += np.einsum("m,mai,mbij->mabj", wt * tau_m / rho, g, dls_u)
            k_pp += np.einsum("m,mab->mab", wt * tau_m / rho, gab)
            # grad-div rows
            dtau_c = np.where(
                adv_branch[:, None],
                (h / (2.0 * np.maximum(spd, 1e-300)))[:, None] * c,
                (h ** 2 / (6.0 * nu))[:, None] * c)
            k_uu += np.einsum("m,b,mj,mai->maibj", wt * rho * divu,
                              nq, dtau_c, g)
            k_uu += np.einsum("m,mai,mbj->maibj", wt * tau_c * rho, g, g)

    # traction load on the lateral boundary
    load = _edge_load(state, bcs, ("traction",), 2)
    r_u_nodal = np.zeros((n, 2))
    np.add.at(r_u_nodal, tris.ravel(), r_u.reshape(-1, 2))
    r_u_nodal -= load

    r_p_nodal = np.zeros(n)
    np.add.at(r_p_nodal, tris.ravel(), r_p.ravel())

    # scatter Jacobian, dof order [ux0 uy0 ux1 uy1 ... | p0 p1 ...]
    udof = np.stack([2 * tris, 2 * tris + 1], axis=2).reshape(m, 6)
    pdof = 2 * n + tris
    edof = np.concatenate([udof, pdof], axis=1)          # (m, 9)
    ke = np.zeros((m, 9, 9))
    ke[:, :6, :6] = k_uu.reshape(m, 6, 6)
    ke[:, :6, 6:] = k_up.reshape(m, 6, 3)
    ke[:, 6:, :6] = k_pu.reshape(m, 3, 6)
    ke[:, 6:, 6:] = k_pp
    rows = np.repeat(edof, 9, axis=1).ravel()
    cols = np.tile(edof, (1, 9)).ravel()
    jac = sp.coo_matrix((ke.ravel(), (rows, cols)),
                        shape=(3 * n, 3 * n)).tocsr()

    resid = np.concatenate([r_u_nodal.ravel(), r_p_nodal])

    # Dirichlet rows and pressure gauge
    didx, dval, covered = _dirichlet_velocity(state, bcs)
    _check_velocity_coverage(state, bcs, covered)
    fixed = np.zeros(3 * n, dtype=bool)
    fixed[didx] = True
    fixvals = np.zeros(3 * n)
    fixvals[didx] = dval
    has_traction = any(bc.kind == "traction" for bc in bcs)
    if pin_pressure is not None and not has_traction:
        fixed[2 * n + pin_pressure] = True
        fixvals[2 * n + pin_pressure] = 0.0

    x_now = np.concatenate([uu.ravel(), pp])
    resid[fixed] = x_now[fixed] - fixvals[fixed]
    jac = _apply_rows(jac, fixed)

    return SlabSystem(residual=resid, jacobian=jac, fixed=fixed,
                      meta={"n_nodes": n, "pin_pressure": pin_pressure,
                            "dirichlet_values": fixvals})


def _apply_rows(jac: sp.csr_matrix, fixed: np.ndarray) -> sp.csr_matrix:
    """Replace the rows marked fixed with identity rows."""
    keep = sp.diags((~fixed).astype(float))
    eye = sp.diags(fixed.astype(float))
    return (keep @ jac + eye).tocsr()


def assemble_temp_slab(state: SimState, material: MaterialModel, bcs,
                       u=None, T=None, T_lag=None):
    """Residual and Jacobian of the heat slab at iterate T.

    u is the slab-top velocity driving advection and dissipation
    (default state.u); T_lag is the temperature at which viscosity and
    conductivity are evaluated (default the bottom trace), keeping the
    system linear in the unknown T.
    """
    if state.T is None:
        raise ValueError("state has no temperature field")
    n = state.n_nodes
    uu = state.u if u is None else np.asarray(u, dtype=float)
    tt = state.T if T is None else np.asarray(T, dtype=float)
    tlag = state.T if T_lag is None else np.asarray(T_lag, dtype=float)
    tris = state.tris
    m = tris.shape[0]
    rho, c_p = material.rho, material.c_p
    rc = rho * c_p
    dt = state.dt

    x0 = state.coords_n[tris]
    x1 = state.coords_n1[tris]
    vm_e = (x1 - x0) / dt
    ue = uu[tris]
    te = tt[tris]
    tb_e = state.T[tris]
    tlag_e = tlag[tris]

    det0, _ = _tri_grads(x0)
    if np.any(det0 <= 0.0):
        raise MeshError("inverted space-time element at the slab bottom")

    r_t = np.zeros((m, 3))
    k_tt = np.zeros((m, 3, 3))
    phi_total = 0.0

    for sq in range(3):
        nq = _SPACE_Q[sq]
        wt = det0 / 6.0
        dT = (te - tb_e) @ nq
        r_t += rc * np.einsum("m,a->ma", wt * dT, nq)
        k_tt += rc * np.einsum("m,a,b->mab", wt, nq, nq)

    for th in _TIME_Q:
        x = (1.0 - th) * x0 + th * x1
        det, g = _tri_grads(x)
        if np.any(det <= 0.0):
            raise MeshError("inverted space-time element inside the slab")
        h = np.sqrt(det)
        gradu = np.einsum("mai,maj->mij", ue, g)
        eps = 0.5 * (gradu + np.swapaxes(gradu, 1, 2))
        gdot = np.sqrt(2.0 * np.einsum("mij,mij->m", eps, eps))
        gradt = np.einsum("ma,mai->mi", te, g)
        gab = np.einsum("mak,mbk->mab", g, g)

        for sq in range(3):
            nq = _SPACE_Q[sq]
            wt = (0.5 * dt) * (det / 6.0)
            uq = np.einsum("a,mai->mi", nq, ue)
            vmq = np.einsum("a,mai->mi", nq, vm_e)
            c = uq - vmq
            spd = np.linalg.norm(c, axis=1)
            tq = tlag_e @ nq
            eta = np.asarray(_viscosity_at(material, gdot, tq), dtype=float)
            kap = np.asarray(conductivity(material, eta), dtype=float)
            kap = np.broadcast_to(kap, spd.shape)
            phi = eta * gdot ** 2
            alpha = kap / rc
            tau_t = ((2.0 / dt) ** 2 + (2.0 * spd / h) ** 2
                     + (4.0 * alpha / h ** 2) ** 2) ** -0.5

            cg = np.einsum("mi,mai->ma", c, g)
            cgt = np.einsum("mi,mi->m", c, gradt)

            r_t += np.einsum("m,a->ma", wt * rc * cgt, nq)
            r_t += np.einsum("m,mai,mi->ma", wt * kap, g, gradt)
            r_t -= np.einsum("m,a->ma", wt * phi, nq)
            strong = rc * cgt - phi
            r_t += np.einsum("m,ma->ma", wt * tau_t * strong, cg)
            phi_total += float(np.sum(wt * phi))

            k_tt += np.einsum("m,a,mb->mab", wt * rc, nq, cg)
            k_tt += np.einsum("m,mab->mab", wt * kap, gab)
            k_tt += np.einsum("m,ma,mb->mab", wt * tau_t * rc, cg, cg)

    load = _edge_load(state, bcs, ("heat-flux",), 1)
    r_nodal = np.zeros(n)
    np.add.at(r_nodal, tris.ravel(), r_t.ravel())
    r_nodal -= load[:, 0]

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    jac = sp.coo_matrix((k_tt.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    # Dirichlet temperatures
    fixed = np.zeros(n, dtype=bool)
    fixvals = np.zeros(n)
    covered = [np.empty(0, dtype=np.int64)]
    for bc in bcs:
        if bc.kind != "temperature":
            continue
        nodes = _region_indices(state, bc.region)
        vals = _eval_bc(bc, state.coords_n1[nodes], 1)
        fixed[nodes] = True
        fixvals[nodes] = vals
        covered.append(nodes)
    if state.boundary_edges is not None:
        bnodes = np.unique(state.boundary_edges)
        flux_nodes = [np.empty(0, dtype=np.int64)]
        for bc in bcs:
            if bc.kind == "heat-flux":
                flux_nodes.append(_region_indices(state, bc.region))
        ok = fixed.copy()
        ok[np.concatenate(flux_nodes)] = True
        missing = bnodes[~ok[bnodes]]
        if missing.size:
            raise ValueError(
                f"{missing.size} boundary nodes lack a temperature or "
                f"heat-flux condition (first: node {int(missing[0])})")

    r_nodal[fixed] = tt[fixed] - fixvals[fixed]
    jac = _apply_rows(jac, fixed)
    return SlabSystem(residual=r_nodal, jacobian=jac, fixed=fixed,
                      meta={"n_nodes": n, "dissipation_integral": phi_total,
                            "dirichlet_values": fixvals})


# ---------------------------------------------------------------------------
# nonlinear and coupling drivers
# ---------------------------------------------------------------------------

def newton_solve(build, x0: np.ndarray, tol_rel: float = 1e-8,
                 max_iter: int = 50, abs_floor: float = 1e-12):
    """Newton iteration on build(x) -> SlabSystem.

    Stops when the residual norm falls below tol_rel times its initial
    value or below abs_floor.  Returns (x, residual_history).
    """
    x = np.array(x0, dtype=float)
    history = []
    norm0 = None
    for _ in range(max_iter):
        system = build(x)
        nrm = float(np.linalg.norm(system.residual))
        history.append(nrm)
        if norm0 is None:
            norm0 = nrm
        if nrm <= max(tol_rel * norm0, abs_floor):
            return x, history
        try:
            lu = spla.splu(system.jacobian.tocsc())
            dx = lu.solve(-system.residual)
        except RuntimeError as exc:
            raise NonConvergenceError(
                "singular slab system; check pressure pinning and "
                f"boundary conditions ({exc})", history) from exc
        if not np.all(np.isfinite(dx)):
            raise NonConvergenceError(
                "linear solve produced non-finite update; check pressure "
                "pinning and boundary conditions", history)
        x = x + dx
    raise NonConvergenceError(
        f"Newton did not reach tol_rel={tol_rel:g} in {max_iter} "
        f"iterations (residuals {['%.3e' % r for r in history]})", history)


def _solve_flow(state, material, bcs, tol_rel, max_iter):
    n = state.n_nodes

    def build(x):
        return assemble_flow_slab(state, material, bcs,
                                  u=x[:2 * n].reshape(n, 2), p=x[2 * n:])

    x0 = np.concatenate([state.u.ravel(), state.p])
    x, hist = newton_solve(build, x0, tol_rel=tol_rel, max_iter=max_iter)
    return x[:2 * n].reshape(n, 2), x[2 * n:], hist


def _solve_temp(state, material, bcs, u_top, t_lag, tol_rel, max_iter):
    def build(x):
        return assemble_temp_slab(state, material, bcs, u=u_top, T=x,
                                  T_lag=t_lag)

    x, hist = newton_solve(build, state.T.copy(), tol_rel=tol_rel,
                           max_iter=max_iter)
    return x, hist


def advance(state: SimState, asm: SrmumAssembly, material: MaterialModel,
            bcs, omega: float, coupling: str = "auto",
            freeze_mesh: bool = False, tol_rel: float = 1e-8,
            max_iter: int = 50, coupling_tol: float = 1e-6,
            max_couple: int = 25) -> SimState:
    """Advance one slab: rotate, re-snap, solve flow (and temperature).

    coupling: 'isothermal' solves flow only; 'one-way' solves flow then
    temperature once (enough whenever viscosity ignores T); 'fixed-point'
    alternates the two solves until the iterates settle; 'auto' picks
    isothermal when no temperature field exists, fixed-point for a
    temperature-dependent viscosity and one-way otherwise.
    """
    rotation = state.rotation + omega * state.dt
    coords_n = state.coords_n1
    if freeze_mesh:
        coords_n1 = coords_n
    else:
        coords_n1 = snap(asm, rotation)
    new = replace(state, t=state.t + state.dt, rotation=rotation,
                  coords_n=coords_n, coords_n1=coords_n1,
                  u=state.u.copy(), p=state.p.copy(),
                  T=None if state.T is None else state.T.copy())

    if coupling == "auto":
        if new.T is None:
            coupling = "isothermal"
        elif isinstance(material.variant, CrossWLF):
            coupling = "fixed-point"
        else:
            coupling = "one-way"

    if coupling == "isothermal":
        u, p, _ = _solve_flow(new, material, bcs, tol_rel, max_iter)
        new.u, new.p = u, p
        return new
    if new.T is None:
        raise ValueError(f"coupling {coupling!r} needs a temperature field")

    if coupling == "one-way":
        u, p, _ = _solve_flow(new, material, bcs, tol_rel, max_iter)
        new.u, new.p = u, p
        t, _ = _solve_temp(new, material, bcs, u, new.T, tol_rel, max_iter)
        new.T = t
        return new

    if coupling != "fixed-point":
        raise ValueError(f"unknown coupling mode {coupling!r}")

    t_k = new.T.copy()
    u_k = new.u.copy()
    scale_u = None
    for _ in range(max_couple):
        flow_state = replace(new, u=new.u, p=new.p,
                             T=t_k, coords_n=new.coords_n,
                             coords_n1=new.coords_n1)
        u_new, p_new, _ = _solve_flow(flow_state, material, bcs,
                                      tol_rel, max_iter)
        t_new, _ = _solve_temp(new, material, bcs, u_new, t_k,
                               tol_rel, max_iter)
        if scale_u is None:
            scale_u = max(float(np.max(np.abs(u_new))), 1e-300)
        du = float(np.max(np.abs(u_new - u_k))) / scale_u
        dt_rel = float(np.max(np.abs(t_new - t_k))) / max(
            float(np.max(np.abs(t_new))), 1e-300)
        u_k, t_k, p_k = u_new, t_new, p_new
        if max(du, dt_rel) < coupling_tol:
            new.u, new.p, new.T = u_k, p_k, t_k
            return new
    raise NonConvergenceError(
        f"flow-temperature fixed point did not settle in {max_couple} "
        "passes", [])
