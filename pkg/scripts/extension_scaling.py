"""Fit log-log slopes of bubble extension norms against mesh size.

    python scripts/extension_scaling.py --families hu_zhang_hessian_2d hu_ma_zhang_divdiv_2d --levels 1 2 3
"""

import argparse
import json
from dataclasses import asdict, dataclass, field

from fects import catalog as CAT
from fects.projections import bubble_extension_scaling


@dataclass
class ScalingConfig:
    families: list = field(default_factory=lambda: list(CAT.FAMILIES_2D))
    levels: tuple = (1, 2, 3)
    shape: str = "square"
    tol: float = 0.05


def run(cfg):
    rows = []
    for name in cfg.families:
        fam = CAT.get_family(name)
        for rec in bubble_extension_scaling(fam, cfg.levels, cfg.shape):
            rows.append({"family": name, **asdict(rec), "ok": rec.matches(cfg.tol)})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", nargs="+", default=ScalingConfig().families)
    ap.add_argument("--levels", nargs="+", type=int, default=[1, 2, 3])
    ap.add_argument("--shape", default="square")
    ap.add_argument("--json", action="store_true")
    a = ap.parse_args()
    rows = run(ScalingConfig(a.families, tuple(a.levels), a.shape))
    if a.json:
        print(json.dumps(rows, indent=1))
        return
    print(f"{'family':8} {'dim':>3} {'slot':>4} {'kind':>5} {'i':>3} {'slope':>8} {'pred':>6} {'raw':>8}  ok")
    for r in rows:
        print(f"{r['family']:8} {r['simplex_dim']:>3} {r['slot']:>4} {r['kind']:>5} {r['index']:>3} "
              f"{r['slope']:8.4f} {r['predicted']:6.2f} {r['raw_slope']:8.4f}  {'y' if r['ok'] else 'n'}")
    print(f"{sum(r['ok'] for r in rows)}/{len(rows)} slopes match")


if __name__ == "__main__":
    main()
