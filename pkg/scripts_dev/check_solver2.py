"""Dev checks: conduction annulus, coupled slab, twin-screw advance."""
import time

import numpy as np

import screwsim.solver as sv
from screwsim.geometry import ScrewParams
from screwsim.materials import Carreau, MaterialModel, Newtonian
from screwsim.srmum import build_assembly, build_annulus

# --- conduction annulus ----------------------------------------------------
ri, ro = 1.0, 2.0
ti, to = 400.0, 300.0
asm = build_annulus(ri, ro, n_s=64, n_r=10)
mat = MaterialModel(Newtonian(1.0), rho=1e-3, c_p=1.0, kappa0=1.0)
st = sv.initial_state(asm, 0.0, dt=1e4, T0=300.0)
bcs = [sv.BoundaryCondition("left_screw", "velocity", (0.0, 0.0)),
       sv.BoundaryCondition("barrel", "velocity", (0.0, 0.0)),
       sv.BoundaryCondition("left_screw", "temperature", ti),
       sv.BoundaryCondition("barrel", "temperature", to)]


def buildT(x):
    return sv.assemble_temp_slab(st, mat, bcs, u=np.zeros((st.n_nodes, 2)),
                                 T=x)


t_sol, hist = sv.newton_solve(buildT, st.T.copy())
r = np.linalg.norm(st.coords_n1, axis=1)
t_exact = ti + (to - ti) * np.log(r / ri) / np.log(ro / ri)
l2 = np.sqrt(np.sum((t_sol - t_exact) ** 2) / np.sum(t_exact ** 2))
over = max(t_sol.max() - max(ti, to), min(ti, to) - t_sol.min())
print(f"conduction: L2 {l2:.3e}  overshoot {over / abs(ti - to):.2e} "
      f"iters {len(hist) - 1}")

# --- one-way coupled slab with dissipation ---------------------------------
mat2 = MaterialModel(Newtonian(50.0), rho=1e-3, c_p=1.0, kappa0=1.0)
st2 = sv.initial_state(asm, 0.0, dt=10.0, T0=300.0)
om = 2.0
bcs2 = [sv.BoundaryCondition("left_screw", "velocity",
                             lambda p: sv.boundary_velocity(p, (0, 0), om)),
        sv.BoundaryCondition("barrel", "velocity", (0.0, 0.0)),
        sv.BoundaryCondition("left_screw", "temperature", 300.0),
        sv.BoundaryCondition("barrel", "temperature", 300.0)]
st2b = sv.advance(st2, asm, mat2, bcs2, omega=0.0, freeze_mesh=True)
print(f"coupled: max T rise {st2b.T.max() - 300.0:.4f} K "
      f"(positive expected), u max {np.abs(st2b.u).max():.3f}")

# --- twin-screw advance on mesh 1 ------------------------------------------
params = ScrewParams(r_s=15.275e-3, c_l=26.2e-3, delta_s=0.2e-3,
                     delta_b=0.15e-3, n_f=2)
t0 = time.perf_counter()
asm_t = build_assembly(params, n_s=280, n_r=6)
rpm = 60.0
omega = 2.0 * np.pi * rpm / 60.0
dt = 0.0125
theta0 = np.deg2rad(-9.0)
state = sv.initial_state(asm_t, theta0, dt=dt)
matC = MaterialModel(Carreau(1290.0, 0.0, 0.112, 0.559),
                     rho=1000.0, c_p=1500.0, kappa0=0.5)
cl = params.c_l


def bc_screw(center, om):
    return lambda p: sv.boundary_velocity(p, center, om)


bcs_t = [sv.BoundaryCondition("left_screw", "velocity",
                              bc_screw((-cl / 2.0, 0.0), omega)),
         sv.BoundaryCondition("right_screw", "velocity",
                              bc_screw((cl / 2.0, 0.0), omega)),
         sv.BoundaryCondition("barrel", "velocity", (0.0, 0.0))]
print(f"setup {time.perf_counter() - t0:.1f}s, nodes {state.n_nodes}")
for k in range(2):
    t1 = time.perf_counter()
    state = sv.advance(state, asm_t, matC, bcs_t, omega=omega)
    print(f"slab {k}: rot {np.rad2deg(state.rotation):.2f} deg, "
          f"|u|max {np.abs(state.u).max():.4f} m/s, "
          f"p range [{state.p.min():.0f}, {state.p.max():.0f}] Pa "
          f"({time.perf_counter() - t1:.1f}s)")
