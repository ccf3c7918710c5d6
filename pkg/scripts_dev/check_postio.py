"""Dev smoke checks for postio."""
import numpy as np

import screwsim.postio as po
from screwsim.srmum import build_annulus

rng = np.random.default_rng(3)
asm = build_annulus(1.0, 2.0, n_s=16, n_r=3)
from screwsim.srmum import snap
coords = snap(asm, 0.0)
n = coords.shape[0]

lin = 2.0 * coords[:, 0] - 3.0 * coords[:, 1] + 0.5
vel = np.stack([-coords[:, 1], coords[:, 0]], axis=1)  # rigid rotation
snapshot = po.FieldSnapshot(coords=coords, cells=asm.quads, cell_type=9,
                            fields={"velocity": vel, "pressure": lin},
                            time=0.25, orientation=0.1)

po.export_vtk(snapshot, "/tmp/rt.vtk")
back = po.read_vtk("/tmp/rt.vtk")
print("round trip coords:", np.abs(back.coords - coords).max())
print("round trip vel:", np.abs(back.fields["velocity"] - vel).max())
print("round trip p:", np.abs(back.fields["pressure"] - lin).max())
print("meta:", back.time, back.orientation, back.cell_type)

# linear field exact along a line through the annulus
tab = po.sample_line(snapshot, (-2.5, 0.01), (2.5, 0.01), 101)
pts = tab["points"]
expect = 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 0.5
ok = ~np.isnan(tab["pressure"])
print("samples inside:", ok.sum(), "of", ok.size)
print("linear exactness:", np.abs(tab["pressure"][ok] - expect[ok]).max())

# flux of rigid rotation through radial section = 0; around boundary = 0
inner = asm.screw_nodes[0]
ring = np.concatenate([inner, inner[:1]])
print("closed inner flux:", po.section_flux(snapshot, ring, 1000.0,
                                            closed=True))
radial = asm.block_nodes[0][0, :]  # one ray, inner to outer
print("radial flux (rigid):", po.section_flux(snapshot, radial, 1000.0))

rep = po.convergence_report([
    ("m1", expect + 0.01 * np.abs(expect).max()),
    ("m2", expect + 0.001 * np.abs(expect).max()),
    ("m3", expect)])
for row in rep:
    print(row)
