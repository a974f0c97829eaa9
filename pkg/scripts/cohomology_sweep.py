"""Global cohomology of every 2D family over the built-in meshes.

    python scripts/cohomology_sweep.py --shapes square annulus --refine 0
"""

import argparse
import time
from dataclasses import dataclass, field

from fects import assembly as A
from fects import catalog as CAT
from fects.mesh import generate_mesh


@dataclass
class SweepConfig:
    families: list = field(default_factory=lambda: list(CAT.FAMILIES_2D))
    shapes: list = field(default_factory=lambda: ["square", "annulus", "l_shape", "two_holes"])
    refine: int = 0
    extra_k: int = 0          # raise every family above its minimal degree


def run(cfg):
    for shape in cfg.shapes:
        mesh = generate_mesh(shape, cfg.refine)
        for name in cfg.families:
            fam = CAT.get_family(name, CAT.FAMILIES[name].min_k + cfg.extra_k)
            t0 = time.perf_counter()
            rep = A.cohomology(A.FamilyOnMesh(fam, mesh))
            yield shape, name, fam.k, rep, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", nargs="+", default=SweepConfig().families)
    ap.add_argument("--shapes", nargs="+", default=SweepConfig().shapes)
    ap.add_argument("--refine", type=int, default=0)
    ap.add_argument("--extra-k", type=int, default=0)
    a = ap.parse_args()
    bad = 0
    for shape, name, k, rep, dt in run(SweepConfig(a.families, a.shapes, a.refine, a.extra_k)):
        bad += not rep.ok
        print(f"{shape:10} {name:6} k={k} dims={rep.dims} H={rep.computed} "
              f"expected={rep.expected} {'ok' if rep.ok else 'FAIL'} ({dt:.1f}s)")
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
