"""A Dirac wave packet next to the classical electron it turns into.

Run with ``python demos/01_wavepacket_vs_particles.py``.  Prints the centre of
mass of the packet and of a particle ensemble sampled from the same phase
space Gaussian, for shrinking epsilon.
"""
# %%
import numpy as np

from diraclimit.densities import GaussianDensity
from diraclimit.dirac_solver import SpatialGrid, diagnostics, evolve, make_coherent_state
from diraclimit.emfield import make_potential
from diraclimit.vlasov import evolve_ensemble, sample_ensemble

# A static bump in A0 plus a transient vector-potential pulse.  The pulse
# carries an electric field -dA/dt and, through x-dependence, a magnetic one.
model = make_potential([
    {"preset": "gaussian_bump_A0", "amplitude": 0.5, "width": 0.6, "center": [0.3, 0, 0]},
    {"preset": "time_pulse", "amplitude": [0, 0.15, 0], "direction": [1, 0, 0],
     "t0": 0.25, "duration": 0.4, "length": 1.5},
], active_dims=1)

x0, xi0, T = -0.4, 0.5, 0.5

# %% classical electrons started on the packet's Husimi-like spread
for eps in (0.4, 0.2, 0.1, 0.05):
    grid = SpatialGrid(1, 1024, 6.4)
    psi = make_coherent_state(grid, eps, ([x0], [xi0]), 1, model=model, polarization="spectral")
    final = evolve(psi, model, 0.0, T, 0.05 * eps)[-1][1]
    rho = diagnostics(final, model, T).rho
    x_q = np.sum(rho * grid.axis) * grid.cell_volume

    spread = np.sqrt(eps / 2)
    f = GaussianDensity.create(1, x0=x0, v0=xi0, sigma_x=spread, sigma_v=spread)
    ens = sample_ensemble(f, 4096, 1, 0, model=model)
    x_c = float(np.sum(ens.weight * evolve_ensemble(model, ens, 0.0, T, 0.01).final.x[:, 0]))
    print(f"eps={eps:<5}  <x>_Dirac={x_q:+.5f}  <x>_Vlasov={x_c:+.5f}  gap={abs(x_q - x_c):.2e}")

# %%
# The gap shrinks with epsilon: the electron band of the Dirac flow follows
# the relativistic Lorentz characteristics dx/dt = v/<v>, dv/dt = E + v/<v> x B.
