"""Accuracy of the five diffusion flux schemes on one fixed problem.

cdg2 and cdg are the compact lifting-based pair (cdg uses doubled
lifting dissipation), br2 lifts on both sides, ip is the classic
interior penalty, and bo has no dissipation at all (kept for
demonstration; it is not stable in general).  On a smooth solution all
the stabilized schemes converge at the same order; what differs is the
error constant and the cost per application.
"""

import time

import numpy as np

from taxisdg.analysis import l2_error
from taxisdg.fespace import DGSpace
from taxisdg.flux import FluxScheme, SCHEME_NAMES
from taxisdg.mesh import unit_square
from taxisdg.model import HeatModel
from taxisdg.operator import DiscreteOperator
from taxisdg.timeint import integrate

model = HeatModel(kappa=0.02)
mesh = unit_square(4).refine_uniform()
order, t_end, dt = 2, 0.25, 0.025

print(f"{mesh.n_elements} elements, order {order}, t_end {t_end}")
print(f"{'flux':8s} {'error':>12s} {'cpu [s]':>9s}")
for name in SCHEME_NAMES:
    space = DGSpace(mesh, order)
    op = DiscreteOperator(space, model, FluxScheme(name))
    U0 = space.project(lambda x: model.exact(x, 0.0)).coeffs
    tic = time.process_time()
    res = integrate(op, U0, 0.0, t_end, dt, order=3,
                    newton_kwargs={"rtol": 1e-9, "atol": 1e-12})
    cpu = time.process_time() - tic
    err = l2_error(space.function(res.U), model.exact, t_end)
    print(f"{name:8s} {err:12.4e} {cpu:9.2f}")
