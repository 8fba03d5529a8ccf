"""Convergence of the DG discretization on a decaying heat mode.

The 2D heat equation with u = exp(-2 kappa pi^2 t) sin(pi x) sin(pi y)
has a closed form, so the broken-L2 error at the final time is exact.
Refining the mesh while halving dt should show order k+1 convergence
for polynomial degree k once the mesh resolves the mode.

Run:  python3 demos/heat_convergence.py
"""

from taxisdg.analysis import run_eoc_study, write_eoc_csv
from taxisdg.flux import FluxScheme
from taxisdg.mesh import unit_square
from taxisdg.model import HeatModel

model = HeatModel(kappa=0.02)
mesh0 = unit_square(4)
scheme = FluxScheme("cdg2")

studies = []
for order in (1, 2, 3):
    print(f"order {order}:")
    study = run_eoc_study(
        model, mesh0, order, scheme,
        t_end=0.25, dt0=0.05, levels=3,
        exact=model.exact, tableau_order=3,
        newton_kwargs={"rtol": 1e-9, "atol": 1e-12},
        verbose=True)
    for lvl in range(len(study.errors)):
        rate = f"{study.rates[lvl - 1]:.2f}" if lvl else " -- "
        print(f"  level {lvl}: error {study.errors[lvl]:.3e}  rate {rate}")
    studies.append(study)

write_eoc_csv("heat_eoc.csv", studies)
print("table written to heat_eoc.csv")
