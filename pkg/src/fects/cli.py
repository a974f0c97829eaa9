"""Command line front end: `fects {validate|cohomology|stokes|interpolate|report}`."""

import argparse
import json
import os
import random
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from flint import fmpq

from . import __version__
from . import assembly as A
from . import catalog as CAT
from . import currents as C
from . import projections as PR
from .traces import check_localization
from .mesh import DegenerateCell, NonConforming, SHAPES, generate_mesh, read_mesh

SCHEMA = 1
HOMOGENEITY_SCALES = ["2", "3", "1/2", "1/3", "5/2", "2/7", "7", "3/4", "11/5", "1/9"]


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    families: list
    k: object = None
    mesh: str = None
    mesh_file: str = None
    refine: int = 0
    trials: int = None
    seed: int = 0
    jobs: int = 1
    extended: bool = False
    out: str = None
    format: str = "json"


@dataclass
class Report:
    config: dict
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def add(self, check, status, **data):
        rec = {"check": check, "status": "pass" if status else "fail"}
        rec.update(data)
        self.records.append(rec)

    def extend(self, records):
        self.records.extend(records)

    @property
    def ok(self):
        return all(r["status"] == "pass" for r in self.records)

    def as_dict(self):
        passed = sum(r["status"] == "pass" for r in self.records)
        return {"tool": "fects", "version": __version__, "schema": SCHEMA, "config": self.config,
                "records": self.records, "warnings": self.warnings,
                "summary": {"checks": len(self.records), "passed": passed,
                            "failed": len(self.records) - passed, "pass": self.ok}}


def _plain(x):
    if isinstance(x, fmpq):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def render_json(report):
    return json.dumps(_plain(report.as_dict()), sort_keys=True, indent=2) + "\n"


def render_text(report):
    d = report.as_dict()
    lines = [f"fects {d['version']}  {d['config']['command']}",
             f"{'check':<26}{'family':<24}{'slot':>5}  {'where':<14}{'status':<7}detail"]
    skip = {"check", "family", "slot", "status", "simplex", "simplex_dim", "mesh", "k"}
    for r in d["records"]:
        where = r.get("mesh") or ("" if r.get("simplex") is None else str(tuple(r["simplex"])))
        slot = "" if r.get("slot") in (None, -1) else str(r["slot"])
        detail = " ".join(f"{k}={_plain(v)}" for k, v in sorted(r.items()) if k not in skip)
        lines.append(f"{r['check']:<26}{str(r.get('family', '')):<24}{slot:>5}  {where:<14}{r['status']:<7}{detail}")
    for w in d["warnings"]:
        lines.append(f"warning: {w}")
    s = d["summary"]
    lines.append(f"{s['passed']}/{s['checks']} passed" + ("" if s["pass"] else "  FAILED"))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------- helpers


def load_mesh(cfg, dim):
    if cfg.mesh_file:
        try:
            mesh = read_mesh(Path(cfg.mesh_file).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read mesh file: {e}")
        except (ValueError, DegenerateCell, NonConforming) as e:
            raise ConfigError(f"bad mesh file: {e}")
        name = cfg.mesh_file
    else:
        name = cfg.mesh or ("square" if dim == 2 else "tet")
        if name not in SHAPES:
            raise ConfigError(f"unknown mesh {name!r}; expected one of {', '.join(SHAPES)}")
        if cfg.refine < 0:
            raise ConfigError("--refine must be >= 0")
        mesh = generate_mesh(name, cfg.refine)
        if cfg.refine:
            name = f"{name}@{cfg.refine}"
    if mesh.n != dim:
        raise ConfigError(f"mesh dimension {mesh.n} does not match the family dimension {dim}")
    if dim == 3 and not cfg.extended and len(mesh.cells) > 6:
        raise ConfigError("3D global runs beyond the tet and cube meshes need --extended")
    return mesh, name


def family_for(cfg, name):
    try:
        return CAT.get_family(name, cfg.k)
    except CAT.UnknownFamily:
        raise ConfigError(f"unknown family {name!r}; expected one of {', '.join(CAT.FAMILY_NAMES)}")
    except CAT.DegreeTooLow as e:
        raise ConfigError(str(e))


def _global(cfg, report, name, with_direct_sum=False):
    fam = family_for(cfg, name)
    mesh, mname = load_mesh(cfg, fam.n)
    fm = A.FamilyOnMesh(fam, mesh)
    spaces = []
    for s in range(fam.n + 1):
        try:
            spaces.append(A.assemble_space(fm, s))
            report.add("assemble_space", True, family=name, mesh=mname, slot=s,
                       dof_dim=spaces[-1].dof_dim, constraint_dim=spaces[-1].constraint_dim)
        except A.DimensionMismatch as e:
            report.add("assemble_space", False, family=name, mesh=mname, slot=s, error=str(e))
            return fm, None
    Ds = A.global_complex(fm)
    coh = A.cohomology(fm, Ds)
    report.add("cohomology", coh.ok, family=name, k=fam.k, mesh=mname,
               dims={"A": coh.dims, "S": [sp.skeletal for sp in spaces],
                     "B_total": [sp.bubbles for sp in spaces]},
               cohomology={"computed": coh.computed, "expected": coh.expected},
               harmonic_counts=coh.harmonic_counts, d_squared_zero=coh.cocycle_ok,
               harmonic_spans_simplicial=coh.harmonic_ls_ok)
    report.add("skeletal_isomorphism", A.check_skeletal_isomorphism(fm, Ds), family=name, mesh=mname)
    if with_direct_sum:
        for s in range(fam.n + 1):
            r = A.check_direct_sum(fm, s, Ds)
            report.add("direct_sum", r.ok, family=name, mesh=mname, slot=s,
                       **{k: v for k, v in asdict(r).items() if k != "slot"})
    return fm, Ds


# -------------------------------------------------------------- commands


def cmd_validate(cfg, report):
    for name in cfg.families:
        family_for(cfg, name)
        r = CAT.validate_family(name, cfg.k, extended=cfg.extended, jobs=cfg.jobs)
        report.extend(r["records"])
        for s in r["skipped"]:
            report.warnings.append(f"{name}: {s} skipped (use --extended)")


def cmd_cohomology(cfg, report):
    for name in cfg.families:
        _global(cfg, report, name)


def _stokes_targets(names):
    out = []
    for name in names:
        if name in C.CURRENTS_NAMES:
            out.append((name, None))
        elif name in CAT.FAMILIES:
            out.append((CAT.FAMILIES[name].currents_name, name))
        else:
            raise ConfigError(f"unknown family {name!r}")
    return out


def cmd_stokes(cfg, report):
    trials = 100 if cfg.trials is None else cfg.trials
    if trials < 0:
        raise ConfigError("--trials must be >= 0")
    if trials == 0:
        report.warnings.append("--trials 0: nothing was sampled, the result is vacuous")
    rng = random.Random(cfg.seed)
    for cname, fname in _stokes_targets(cfg.families or list(C.CURRENTS_NAMES)):
        cur = C.get_currents(cname)
        for level, ok in C.stokes_trials(cur, trials, rng).items():
            report.add("stokes", ok == trials, family=cname, slot=level, passes=ok, trials=trials)
        scales = HOMOGENEITY_SCALES if trials else []
        hom, rec = C.homogeneity_trials(cur, scales, rng)
        for level, ok in hom.items():
            report.add("homogeneity", ok == len(scales), family=cname, slot=level,
                       passes=ok, trials=len(scales), exponent=cur.exponents()[level])
        report.add("exponent_recursion", rec, family=cname, exponents=cur.exponents())
        if fname:
            fam = family_for(cfg, fname)
            ok = 0
            for _ in range(trials):
                pts = C.random_cell(rng, fam.n)
                d = rng.randint(0, fam.n)
                tau = tuple(sorted(rng.sample(range(fam.n + 1), d + 1)))
                ok += check_localization(fam, pts, tau)
            report.add("localization", ok == trials, family=fname, passes=ok, trials=trials)


def cmd_interpolate(cfg, report):
    trials = 50 if cfg.trials is None else cfg.trials
    if trials < 0:
        raise ConfigError("--trials must be >= 0")
    if trials == 0:
        report.warnings.append("--trials 0: no random inputs were drawn")
    for name in cfg.families:
        fam = family_for(cfg, name)
        mesh, mname = load_mesh(cfg, fam.n)
        fm = A.FamilyOnMesh(fam, mesh)
        Ds = A.global_complex(fm)
        r = PR.check_commuting(fm, trials, cfg.seed, Ds=Ds)
        report.add("commuting_interpolation", r.ok, family=name, mesh=mname,
                   commuting_trials=trials, passes=r.passes, matrix_identity=r.matrix_identity,
                   projection=r.projection, idempotent=r.idempotent)
        report.add("bubble_projection_commuting", PR.check_bubble_commuting(fm, 3, cfg.seed, Ds),
                   family=name, mesh=mname)
        xi_ok = all(PR.check_vertex_xi(fm, PR.build_vertex_xi(fm, v[0], i))
                    for v in mesh.simplices[0] for i in range(fam.currents.dim_z))
        report.add("vertex_xi", xi_ok, family=name, mesh=mname)
        if cfg.extended and not cfg.mesh_file:
            base = cfg.mesh or ("square" if fam.n == 2 else "tet")
            table = PR.estimate_l2_norm(fam, base, [cfg.refine, cfg.refine + 1, cfg.refine + 2], seed=cfg.seed)
            report.add("l2_ratios", True, family=name, mesh=mname, l2_table=table)


def cmd_report(cfg, report):
    for name in cfg.families:
        family_for(cfg, name)
        r = CAT.validate_family(name, cfg.k, extended=cfg.extended, jobs=cfg.jobs)
        report.extend(r["records"])
        _global(cfg, report, name, with_direct_sum=True)
    cmd_interpolate(cfg, report)


COMMANDS = {"validate": cmd_validate, "cohomology": cmd_cohomology, "stokes": cmd_stokes,
            "interpolate": cmd_interpolate, "report": cmd_report}


# ---------------------------------------------------------------- parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", action="append", help="family name (repeatable)")
    common.add_argument("--all-2d", action="store_true", help="all four 2D families")
    common.add_argument("-k", type=int, default=None, help="degree (default: family minimum)")
    common.add_argument("--mesh", default=None, help=f"built-in mesh: {', '.join(SHAPES)}")
    common.add_argument("--mesh-file", default=None, help="mesh file to load")
    common.add_argument("--refine", type=int, default=0)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: $FECTS_JOBS or 1)")
    common.add_argument("--extended", action="store_true", help="include the expensive 3D stages")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")
    p = argparse.ArgumentParser(prog="fects", description="Exact verification of finite element complexes.")
    p.add_argument("--version", action="version", version=f"fects {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def make_config(args):
    if args.family and args.all_2d:
        raise ConfigError("--family and --all-2d are exclusive")
    families = list(CAT.FAMILIES_2D) if args.all_2d else list(args.family or [])
    if not families and args.command != "stokes":
        raise ConfigError("choose --family NAME or --all-2d")
    if args.mesh and args.mesh_file:
        raise ConfigError("--mesh and --mesh-file are exclusive")
    jobs = args.jobs
    if jobs is None:
        try:
            jobs = int(os.environ.get("FECTS_JOBS", "1"))
        except ValueError:
            raise ConfigError("FECTS_JOBS must be an integer")
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return RunConfig(args.command, families, args.k, args.mesh, args.mesh_file, args.refine,
                     args.trials, args.seed, jobs, args.extended, args.out, args.format)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        echo = asdict(cfg)
        echo.pop("jobs")
        echo.pop("out")
        echo.pop("format")
        report = Report(echo)
        COMMANDS[cfg.command](cfg, report)
    except ConfigError as e:
        print(f"fects: error: {e}", file=sys.stderr)
        return 2
    text = render_json(report) if cfg.format == "json" else render_text(report)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    for w in report.warnings:
        print(f"fects: warning: {w}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
