"""Strong scaling of the operator across worker threads.

Fixed problem, growing thread count.  Element partitions stay fixed at
the largest thread count so partial sums accumulate in the same order
regardless of workers; results are bitwise identical across thread
counts.  Speedup numbers only mean something on a machine with that
many physical cores.

Run:  python3 demos/scaling_threads.py [n]   (mesh size, default 40)
"""

import sys

import numpy as np

from taxisdg.analysis import scaling_study, write_scaling_csv
from taxisdg.fespace import DGSpace
from taxisdg.flux import FluxScheme
from taxisdg.mesh import unit_square
from taxisdg.model import ReducedModel, gaussian_bump
from taxisdg.operator import DiscreteOperator

n = int(sys.argv[1]) if len(sys.argv) > 1 else 40
threads = (1, 2, 4)

mesh = unit_square(n)
model = ReducedModel()
space = DGSpace(mesh, 3, model.n_species)
op = DiscreteOperator(space, model, FluxScheme("cdg2"),
                      npartitions=max(threads))

bump = gaussian_bump((0.5, 0.45), width=0.1, amplitude=0.6)
U = np.zeros((space.mesh.n_elements, model.n_species, space.basis_size))
U[:] = space.project(lambda x: np.stack(
    [np.zeros_like(bump(x)), np.zeros_like(bump(x)), bump(x)],
    axis=-1)).coeffs

results = {}


def make_workload(nthreads):
    op.set_threads(nthreads, max(threads))

    def job():
        out = U
        for _ in range(20):
            out = op.apply_f(out, 0.0)
        results[nthreads] = out

    return job


print(f"{mesh.n_elements} elements, order 3, {space.n_dofs * 3} dofs, "
      f"20 operator applications per run")
rows = scaling_study(make_workload, threads, repeats=3)
for r in rows:
    tag = "" if r.speedup is None else f"  speedup {r.speedup:.2f}"
    print(f"threads {r.threads}: {r.cpu_time:.3f}s{tag}")

vals = list(results.values())
same = all(np.array_equal(vals[0], v) for v in vals[1:])
print("bitwise identical across thread counts:", same)
write_scaling_csv("scaling.csv", rows)
