"""Dev smoke checks for the solver module."""
import time

import numpy as np

import screwsim.solver as sv
from screwsim.materials import Carreau, MaterialModel, Newtonian
from screwsim.srmum import build_annulus, snap

rng = np.random.default_rng(42)

# --- tiny annulus FD Jacobian ---------------------------------------------
asm = build_annulus(0.01, 0.02, n_s=8, n_r=2)
state = sv.initial_state(asm, 0.0, dt=0.1)
n = state.n_nodes
print("nodes", n, "tris", state.tris.shape[0])

# random small motion and fields
state.coords_n1 = state.coords_n * (1.0 + 0.02 * rng.standard_normal((n, 2)))
state.u = 0.05 * rng.standard_normal((n, 2))
state.p = rng.standard_normal(n)

mat = MaterialModel(Newtonian(3.0), rho=900.0, c_p=1800.0, kappa0=0.2)
bcs = [sv.BoundaryCondition("left_screw", "velocity", (0.0, 0.0)),
       sv.BoundaryCondition("barrel", "velocity", (0.0, 0.0))]

x0 = np.concatenate([(0.05 * rng.standard_normal((n, 2))).ravel(),
                     rng.standard_normal(n)])


def build(x):
    return sv.assemble_flow_slab(state, mat, bcs,
                                 u=x[:2 * n].reshape(n, 2), p=x[2 * n:])


sys0 = build(x0)
jac = sys0.jacobian.toarray()
eps = 1e-6
fd = np.zeros_like(jac)
for j in range(x0.size):
    xp = x0.copy(); xp[j] += eps
    xm = x0.copy(); xm[j] -= eps
    fd[:, j] = (build(xp).residual - build(xm).residual) / (2 * eps)
scale = max(np.abs(jac).max(), 1.0)
err = np.abs(fd - jac).max() / scale
print(f"flow FD jacobian rel err: {err:.3e}")

# --- temperature FD -------------------------------------------------------
state.T = 300.0 + 5.0 * rng.standard_normal(n)
tb = [sv.BoundaryCondition("left_screw", "temperature", 310.0),
      sv.BoundaryCondition("barrel", "temperature", 300.0)]
t0 = 300.0 + 5.0 * rng.standard_normal(n)


def buildT(x):
    return sv.assemble_temp_slab(state, mat, tb, T=x)


sysT = buildT(t0)
jacT = sysT.jacobian.toarray()
fdT = np.zeros_like(jacT)
for j in range(n):
    xp = t0.copy(); xp[j] += 1e-4
    xm = t0.copy(); xm[j] -= 1e-4
    fdT[:, j] = (buildT(xp).residual - buildT(xm).residual) / 2e-4
errT = np.abs(fdT - jacT).max() / max(np.abs(jacT).max(), 1.0)
print(f"temp FD jacobian rel err: {errT:.3e}")

# --- Taylor-Couette steady ------------------------------------------------
ri, ro, om = 0.01, 0.02, 5.0
for n_r, n_s in ((5, 32), (10, 64), (20, 128)):
    asm2 = build_annulus(ri, ro, n_s=n_s, n_r=n_r)
    st = sv.initial_state(asm2, 0.0, dt=1e6)
    matN = MaterialModel(Newtonian(10.0), rho=1.0, c_p=1.0, kappa0=1.0)
    bcs2 = [sv.BoundaryCondition("left_screw", "velocity",
                                 lambda pt: sv.boundary_velocity(pt, (0, 0), om)),
            sv.BoundaryCondition("barrel", "velocity", (0.0, 0.0))]
    t0c = time.perf_counter()
    nn = st.n_nodes

    def buildF(x, st=st):
        return sv.assemble_flow_slab(st, matN, bcs2,
                                     u=x[:2 * nn].reshape(nn, 2),
                                     p=x[2 * nn:])

    x, hist = sv.newton_solve(buildF, np.zeros(3 * nn))
    u = x[:2 * nn].reshape(nn, 2)
    r = np.linalg.norm(st.coords_n1, axis=1)
    A = -om * ri ** 2 / (ro ** 2 - ri ** 2)
    B = om * ri ** 2 * ro ** 2 / (ro ** 2 - ri ** 2)
    ut_exact = A * r + B / r
    tang = np.stack([-st.coords_n1[:, 1], st.coords_n1[:, 0]], axis=1) / r[:, None]
    ut = np.einsum("ni,ni->n", u, tang)
    err = np.sqrt(np.sum((ut - ut_exact) ** 2) / np.sum(ut_exact ** 2))
    print(f"TC n_r={n_r:3d}: L2 {err:.4e}  iters {len(hist) - 1} "
          f"({time.perf_counter() - t0c:.2f}s)")

# --- rigid co-rotation ----------------------------------------------------
asm3 = build_annulus(1.0, 2.0, n_s=64, n_r=10)
st3 = sv.initial_state(asm3, 0.0, dt=100.0)
matS = MaterialModel(Newtonian(100.0), rho=1e-6, c_p=1.0, kappa0=1.0)
om3 = 1.0
bcs3 = [sv.BoundaryCondition("left_screw", "velocity",
                             lambda pt: sv.boundary_velocity(pt, (0, 0), om3)),
        sv.BoundaryCondition("barrel", "velocity",
                             lambda pt: sv.boundary_velocity(pt, (0, 0), om3))]
nn3 = st3.n_nodes


def buildR(x):
    return sv.assemble_flow_slab(st3, matS, bcs3,
                                 u=x[:2 * nn3].reshape(nn3, 2),
                                 p=x[2 * nn3:])


x3, hist3 = sv.newton_solve(buildR, np.zeros(3 * nn3))
u3 = x3[:2 * nn3].reshape(nn3, 2)
# gamma-dot per element from solved field
from screwsim.solver import _tri_grads
det, g = _tri_grads(st3.coords_n1[st3.tris])
gu = np.einsum("mai,maj->mij", u3[st3.tris], g)
eps3 = 0.5 * (gu + np.swapaxes(gu, 1, 2))
gd = np.sqrt(2.0 * np.einsum("mij,mij->m", eps3, eps3))
print(f"rigid co-rotation: max gdot/omega = {gd.max() / om3:.3e}, "
      f"iters {len(hist3) - 1}")
