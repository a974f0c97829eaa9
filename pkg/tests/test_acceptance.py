"""End-to-end acceptance suite: one test, and one PASS/FAIL line, per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines live; they
are also printed into the captured output of each test.
"""

import random
import time

import pytest

from fects import assembly as AS
from fects import catalog as CAT
from fects import currents as C
from fects import mesh as ME
from fects import projections as PR
from fects import traces as TR
from fects.cli import HOMOGENEITY_SCALES

MESHES_2D = ("triangle", "square", "annulus", "l_shape", "two_holes")
COHOMOLOGY_MESHES = ("square", "annulus", "l_shape", "two_holes")


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail, start, budget):
        elapsed = time.perf_counter() - start
        within = elapsed <= budget
        status = "PASS" if ok and within else "FAIL"
        line = (f"criterion {number:>2} {status}  {title}: {detail}  "
                f"[{elapsed:.1f} s, budget {budget:.0f} s{'' if within else ', OVER BUDGET'}]")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line
    return emit


_GLOBAL = {}


def on_mesh(name, mesh):
    """FamilyOnMesh plus its global differentials, shared by criteria 9-11."""
    key = (name, mesh)
    if key not in _GLOBAL:
        fm = AS.FamilyOnMesh(CAT.get_family(name), ME.generate_mesh(mesh, 0))
        for s in range(fm.n + 1):
            AS.assemble_space(fm, s)
        _GLOBAL[key] = (fm, AS.global_complex(fm))
    return _GLOBAL[key]


def test_criterion_01_complex_property(verdict):
    t0 = time.perf_counter()
    rng = random.Random(1)
    total = passed = 0
    for name in C.CURRENTS_NAMES:
        for s, ok in C.complex_trials(name, 100, rng).items():
            total += 100
            passed += ok
    verdict(1, "complex property", passed == total,
            f"{len(C.CURRENTS_NAMES)} complexes, {passed}/{total} compositions vanish", t0, 10)


def _records(check, names, extended=False):
    out = []
    for name in names:
        tasks = [t for t in CAT.validation_tasks(name, extended=extended) if t.check == check]
        out.extend(CAT.run_tasks(tasks))
    return out


def test_criterion_02_trace_inclusion(verdict):
    t0 = time.perf_counter()
    recs = _records("trace_inclusion", CAT.FAMILY_NAMES)
    bad = [r for r in recs if r["status"] != "pass"]
    verdict(2, "trace inclusion", not bad and len(recs) > 0,
            f"{len(recs) - len(bad)}/{len(recs)} chains eta < tau < sigma, all five families", t0, 30)


def test_criterion_03_geometric_decomposition(verdict):
    t0 = time.perf_counter()
    rows, bad = 0, []
    cases = [(n, k) for n in CAT.FAMILIES_2D for k in (CAT.FAMILIES[n].min_k, CAT.FAMILIES[n].min_k + 1)]
    cases.append(("hessian_3d", 9))
    for name, k in cases:
        fam = CAT.get_family(name, k)
        pts = TR.generic_context(fam.n).cell_pts
        for s in range(fam.n + 1):
            r = TR.geometric_decomposition(fam, s, pts)
            rows += 1
            if not r["ok"]:
                bad.append((name, k, s, r["lhs"], r["rhs"]))
    verdict(3, "geometric decomposition", not bad,
            f"{rows - len(bad)}/{rows} (family, k, slot) sums equal dim A, 2D at min k and min k + 1, 3D at k = 9",
            t0, 60 + 20 * 60)


def test_criterion_04_bubble_exactness(verdict):
    t0 = time.perf_counter()
    recs = _records("bubble_exactness", CAT.FAMILIES_2D)
    recs += _records("bubble_exactness", ["hessian_3d"], extended=False)
    bad = [r for r in recs if r["status"] != "pass"]
    dims3 = sorted({len(r["simplex"]) - 1 for r in recs if r["family"] == "hessian_3d"})
    verdict(4, "bubble complex exactness", not bad,
            f"{len(recs) - len(bad)}/{len(recs)} chains with zero defect (2D all, 3D simplex dims {dims3})",
            t0, 120)


def test_criterion_05_stokes(verdict):
    t0 = time.perf_counter()
    rng = random.Random(5)
    rows = []
    for name in C.CURRENTS_NAMES:
        cur = C.get_currents(name)
        for level, ok in C.stokes_trials(cur, 100, rng).items():
            rows.append((name, level, ok))
    bad = [r for r in rows if r[2] != 100]
    inc = [r for r in rows if r[0] == "elasticity_3d" and r[1] == 2]
    verdict(5, "Stokes identity", not bad and inc and inc[0][2] == 100,
            f"{len(rows) - len(bad)}/{len(rows)} (currents, level) pairs at 100/100, incl. the inc level",
            t0, 120)


def test_criterion_06_localization(verdict):
    t0 = time.perf_counter()
    rng = random.Random(6)
    total = passed = 0
    for name in CAT.FAMILY_NAMES:
        fam = CAT.get_family(name)
        cells = [TR.generic_context(fam.n).cell_pts] + [C.random_cell(rng, fam.n) for _ in range(3)]
        for pts in cells:
            for tau in TR.all_subsimplices(fam.n):
                total += 1
                passed += TR.check_localization(fam, pts, tau)
    verdict(6, "localization", passed == total,
            f"{passed}/{total} (family, cell, simplex) identities exact", t0, 60)


def test_criterion_07_homogeneity(verdict):
    t0 = time.perf_counter()
    rng = random.Random(7)
    bad, rows = [], 0
    for name in C.CURRENTS_NAMES:
        cur = C.get_currents(name)
        hom, rec = C.homogeneity_trials(cur, HOMOGENEITY_SCALES, rng)
        rows += len(hom)
        bad += [(name, lv) for lv, ok in hom.items() if ok != len(HOMOGENEITY_SCALES)]
        if not rec:
            bad.append((name, "recursion"))
    verdict(7, "homogeneity", not bad,
            f"{rows} (currents, level) pairs exact for {len(HOMOGENEITY_SCALES)} scale factors; "
            f"exponent recursion holds for all {len(C.CURRENTS_NAMES)}", t0, 30)


def test_criterion_08_unisolvence(verdict):
    t0 = time.perf_counter()
    rows, bad = 0, []
    for name in CAT.FAMILY_NAMES:
        fam = CAT.get_family(name)
        pts = TR.generic_context(fam.n).cell_pts
        chains = CAT.reference_chains(fam)
        for s in range(fam.n + 1):
            rows += 1
            if not TR.unisolvent(TR.local_dofs(fam, s, pts, chains)):
                bad.append((name, s))
    verdict(8, "unisolvence", not bad, f"{rows - len(bad)}/{rows} (family, slot) DOF matrices invertible",
            t0, 60)


def test_criterion_09_cohomology(verdict):
    t0 = time.perf_counter()
    named = {("hermite_stenberg_2d", "annulus"): [1, 1, 0], ("falk_neilan_2d", "annulus"): [1, 1, 0],
             ("hu_zhang_hessian_2d", "annulus"): [3, 3, 0], ("hu_ma_zhang_divdiv_2d", "annulus"): [3, 3, 0]}
    rows, bad = 0, []
    for name in CAT.FAMILIES_2D:
        z = CAT.get_family(name).currents.dim_z
        for mesh in COHOMOLOGY_MESHES:
            fm, Ds = on_mesh(name, mesh)
            rep = AS.cohomology(fm, Ds)
            want = [z * b for b in fm.mesh.betti_numbers()]
            rows += 1
            if not (rep.ok and rep.computed == want and named.get((name, mesh), want) == want):
                bad.append((name, mesh, rep.computed, want))
    verdict(9, "cohomology", not bad,
            f"{rows - len(bad)}/{rows} (family, mesh) pairs equal dim Z x Betti, harmonic forms included",
            t0, 600)


def test_criterion_10_direct_sum(verdict):
    t0 = time.perf_counter()
    rows, bad = 0, []
    for name in CAT.FAMILIES_2D:
        for mesh in MESHES_2D:
            fm, Ds = on_mesh(name, mesh)
            ok = AS.check_skeletal_isomorphism(fm, Ds)
            ok = ok and all(AS.check_direct_sum(fm, s, Ds).ok for s in range(fm.n + 1))
            rows += 1
            if not ok:
                bad.append((name, mesh))
    verdict(10, "direct sum and skeletal isomorphism", not bad,
            f"{rows - len(bad)}/{rows} (family, mesh) pairs", t0, 300)


def test_criterion_11_commuting_interpolation(verdict):
    t0 = time.perf_counter()
    rows, bad = 0, []
    for name in CAT.FAMILIES_2D:
        for mesh in MESHES_2D:
            fm, Ds = on_mesh(name, mesh)
            rep = PR.check_commuting(fm, trials=50, seed=11, Ds=Ds)
            ok = rep.ok and PR.check_bubble_commuting(fm, trials=3, seed=11, Ds=Ds)
            rows += 1
            if not ok:
                bad.append((name, mesh))
    verdict(11, "commuting interpolation", not bad,
            f"{rows - len(bad)}/{rows} (family, mesh) pairs: 50/50 commuting inputs per slot, "
            f"projection, idempotence, bubble-part commuting", t0, 300)


def test_criterion_12_extension_scaling(verdict):
    t0 = time.perf_counter()
    recs = []
    for name in CAT.FAMILIES_2D:
        recs += [(name, r) for r in PR.bubble_extension_scaling(CAT.get_family(name), (1, 2, 3))]
    bad = [(n, r.simplex_dim, r.slot, r.kind, round(r.slope, 3), r.predicted) for n, r in recs if not r.matches()]
    worst = max(r.relative_error() for _, r in recs)
    verdict(12, "bubble extension scaling", not bad,
            f"{len(recs) - len(bad)}/{len(recs)} slopes within 5% of l + (n - dim tau)/2 "
            f"(worst {100 * worst:.2f}%), levels 1-3", t0, 120)
