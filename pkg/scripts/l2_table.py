"""Ratios |Pi u| / |u| of the canonical interpolant on refined meshes.

    python scripts/l2_table.py --families hermite_stenberg_2d falk_neilan_2d --shape square --levels 0 1 2
"""

import argparse
from dataclasses import dataclass, field

from fects import catalog as CAT
from fects.projections import estimate_l2_norm


@dataclass
class L2Config:
    families: list = field(default_factory=lambda: list(CAT.FAMILIES_2D))
    shape: str = "square"
    levels: tuple = (0, 1, 2)
    samples: int = 3
    seed: int = 0


def run(cfg):
    out = {}
    for name in cfg.families:
        fam = CAT.get_family(name)
        out[name] = {s: estimate_l2_norm(fam, cfg.shape, cfg.levels, cfg.samples, cfg.seed, slot=s)
                     for s in range(fam.n + 1)}
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", nargs="+", default=L2Config().families)
    ap.add_argument("--shape", default="square")
    ap.add_argument("--levels", nargs="+", type=int, default=[0, 1, 2])
    ap.add_argument("--samples", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    table = run(L2Config(a.families, a.shape, tuple(a.levels), a.samples, a.seed))
    print(f"{'family':8} {'slot':>4} {'level':>5} {'max':>8} {'mean':>8}")
    for name, slots in table.items():
        for s, rows in slots.items():
            for r in rows:
                print(f"{name:8} {s:>4} {r['level']:>5} {r['max']:8.4f} {r['mean']:8.4f}")


if __name__ == "__main__":
    main()
