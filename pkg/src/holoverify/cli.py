"""Command-line driver: run named verification suites and write a report.

Usage::

    verify zn-boundary-ybe --N 3 --tol 1e-10 --seed 7
    verify --suite all --out report.json

Exit codes: 0 all identities pass, 1 a residual exceeds its tolerance,
2 usage error, 3 a resource cap was hit (partial report written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lattice, on_model, zn_model
from .numerics import ResidualReport, dft, worst

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3

SUITES = (
    "on-bulk-cr",
    "on-boundary-cr",
    "on-reflection",
    "on-enumeration",
    "zn-star-triangle",
    "zn-self-duality",
    "zn-bulk-cr",
    "zn-boundary-cr",
    "zn-boundary-ybe",
    "zn-commutation",
    "zn-free-bc",
)

ON_LAMBDAS = (0.4, 0.7, 1.0)
ON_ALPHAS = (0.5, math.pi / 3, 2.0)


class ResourceCap(RuntimeError):
    pass


@dataclass(frozen=True)
class SuiteConfig:
    suite: str
    N: int | None = None
    lam: float | None = None
    alpha: float | None = None
    beta: float | None = None
    u: float | None = None
    v: float | None = None
    xi: float | None = None
    rows: int | None = None
    cols: int | None = None
    tol: float | None = None
    seed: int = 0
    perturb: float = 0.0
    max_faces: int = 8
    max_sites: int = 12

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in sorted(self.__dataclass_fields__)}


def _tol(cfg, default):
    return cfg.tol if cfg.tol is not None else default


def _pick(value, default):
    return (value,) if value is not None else tuple(default)


def _rng(cfg, suite):
    # one stream per suite so "all" and single runs draw the same points
    return np.random.default_rng([cfg.seed, SUITES.index(suite)])


def _Ns(cfg, lo, hi):
    return _pick(cfg.N, range(lo, hi + 1))


# ---------------------------------------------------------------------------
# O(n) suites


def suite_on_bulk_cr(cfg):
    pts = []
    for lam in _pick(cfg.lam, ON_LAMBDAS):
        for al in _pick(cfg.alpha, ON_ALPHAS):
            s, w, _ = on_model.integrable_point(lam, al)
            w = w.replace(t=w.t + cfg.perturb)
            r = on_model.cr_system_residuals(w, s, al)
            pts.append((float(np.max(np.abs(r))), {"lambda": lam, "alpha": al}))
    return [worst("on bulk CR system", pts, _tol(cfg, 1e-12))]


def suite_on_boundary_cr(cfg):
    pts = []
    for lam in _pick(cfg.lam, ON_LAMBDAS):
        for al in _pick(cfg.alpha, ON_ALPHAS):
            s, _, bw = on_model.integrable_point(lam, al)
            bw = on_model.OnBoundaryWeights(bw.r + cfg.perturb, bw.y)
            pts.append((abs(on_model.boundary_relation(bw, s, al).real), {"lambda": lam, "alpha": al}))
    return [worst("on boundary CR", pts, _tol(cfg, 1e-12))]


def suite_on_reflection(cfg):
    grid = np.linspace(0.1, 0.9, 5)
    pts = []

    def slot(bw):
        e, o = on_model.boundary_operator(bw)
        return (e + cfg.perturb, o)

    for lam in _pick(cfg.lam, (0.5, 0.8)):
        for u in _pick(cfg.u, grid):
            for v in _pick(cfg.v, grid):
                r = on_model.reflection_identity_residual(lam, float(u), float(v), slot=slot)
                pts.append((r, {"lambda": lam, "u": float(u), "v": float(v)}))
    return [worst("on reflection identity", pts, _tol(cfg, 1e-10))]


def _enumeration_shapes(cfg):
    if cfg.rows is not None or cfg.cols is not None:
        rows, cols = cfg.rows or 1, cfg.cols or 1
        if rows * cols > cfg.max_faces:
            raise ResourceCap(f"{rows}x{cols} domain exceeds --max-faces {cfg.max_faces}")
        return [(rows, cols, k) for k in ("rhombi-only", "triangles")]
    out = []
    for rows, cols, kind in lattice.iter_domains(cfg.max_faces, ("rhombi-only", "triangles")):
        # triangle strips wider than two columns are outside the verified class
        if kind == "triangles" and cols > 2 and rows > 1:
            continue
        out.append((rows, cols, kind))
    return out


def suite_on_enumeration(cfg):
    if cfg.max_faces > on_model._cap():
        raise ResourceCap(f"--max-faces {cfg.max_faces} exceeds the enumeration cap {on_model._cap()}")
    rho, tri = [], []
    for rows, cols, kind in _enumeration_shapes(cfg):
        for al in _pick(cfg.alpha, ON_ALPHAS):
            dom = lattice.build_domain(rows, cols, al, kind)
            if dom.boundary_point_a < 0:
                continue
            try:
                ens = on_model.Ensemble(dom)
            except on_model.CapExceeded as exc:
                raise ResourceCap(str(exc)) from exc
            for lam in _pick(cfg.lam, ON_LAMBDAS):
                s, w, bw = on_model.integrable_point(lam, al)
                w = w.replace(t=w.t + cfg.perturb)
                r, t = on_model._holo_residuals(ens, s, w, bw)
                p = {"rows": rows, "cols": cols, "kind": kind, "lambda": lam, "alpha": al}
                rho.append((r, p))
                if dom.faces_of_kind("triangle"):
                    tri.append((t, p))
    tol = _tol(cfg, 1e-10)
    return [worst("on rhombus contour integrals", rho, tol), worst("on triangle real parts", tri, tol)]


# ---------------------------------------------------------------------------
# Z_N suites


def _box(rng, hi, n, margin=1e-3):
    return rng.uniform(margin, hi - margin, n)


def suite_zn_star_triangle(cfg):
    rng = _rng(cfg, "zn-star-triangle")
    pts = []
    for N in _Ns(cfg, 2, 6):
        lam = zn_model.crossing(N)
        us = _pick(cfg.u, _box(rng, lam / 2, 10))
        vs = _pick(cfg.v, _box(rng, lam / 2, len(us)))
        for u, v in zip(us, vs):
            u, v = float(u), float(v)
            r = zn_model.star_triangle_spread(N, u, v, shift=cfg.perturb)
            pts.append((r, {"N": N, "u": u, "v": v}))
    return [worst("zn star-triangle ratio spread", pts, _tol(cfg, 1e-10))]


def suite_zn_self_duality(cfg):
    rng = _rng(cfg, "zn-self-duality")
    pts = []
    for N in _Ns(cfg, 2, 8):
        lam = zn_model.crossing(N)
        for u in _pick(cfg.u, _box(rng, lam, 10)):
            u = float(u)
            What = dft(zn_model.fz_weights(N, u).W)
            ref = zn_model.fz_weights(N, lam - u + cfg.perturb).W
            pts.append((float(np.max(np.abs(What / What[0] - ref))), {"N": N, "u": u}))
    reports = [worst("zn self-duality (normalised)", pts, _tol(cfg, 1e-12))]
    if cfg.N in (None, 2):
        closed = []
        for u in np.linspace(-0.7, 0.7, 100):
            What = dft(zn_model.fz_weights(2, float(u)).W)
            closed.append((abs(What[1] / What[0] - math.tan(u + cfg.perturb)), {"u": float(u)}))
        reports.append(worst("zn self-duality N=2 closed form", closed, _tol(cfg, 1e-12)))
    return reports


def suite_zn_bulk_cr(cfg):
    rng = _rng(cfg, "zn-bulk-cr")
    tol = _tol(cfg, 1e-12)
    ires, rec = [], []
    for N in _Ns(cfg, 2, 8):
        s = zn_model.parafermion_spin(N) + cfg.perturb
        for u in _pick(cfg.u, _box(rng, zn_model.crossing(N), 5)):
            p = {"N": N, "u": float(u), "s": s}
            ires.append((zn_model.bulk_I_residual(N, float(u), s), p))
            rec.append((zn_model.recursion_check(N, float(u), s), p))
    reports = [worst("zn bulk bracket I(r)", ires, tol), worst("zn weight recursion", rec, tol)]

    plaq = []
    al = cfg.alpha if cfg.alpha is not None else 1.0
    patches = [(2, 3, 2), (3, 2, 2)] if cfg.N is None else [(cfg.N, cfg.cols or 2, cfg.rows or 2)]
    for N, nx, ny in patches:
        _check_sites(cfg, N, nx * ny)
        s = zn_model.parafermion_spin(N) + cfg.perturb
        u = zn_model.cr_u(N, al)
        lat = zn_model.SpinLattice(N, nx, ny, al)
        spec = zn_model.SpinObservableSpec(((0, 0), (0, -1)), s)
        for e in range(len(lat.edges)):
            r = abs(zn_model.plaquette_cr_residual(lat, u, spec, e))
            plaq.append((r, {"N": N, "nx": nx, "ny": ny, "edge": e, "alpha": al}))
    reports.append(worst("zn plaquette contour (spin sum)", plaq, _tol(cfg, 1e-10)))

    if cfg.N in (None, 5):
        lam = zn_model.crossing(5)
        ch = []
        for u in _box(rng, lam, 5):
            T = zn_model.charged_transform(zn_model.fz_weights(5, lam + float(u)), 2)
            s2 = zn_model.parafermion_spin(5, 2) + cfg.perturb
            ch.append((zn_model.charged_I_residual(T, float(u), s2, 2), {"N": 5, "m": 2, "u": float(u)}))
        reports.append(worst("zn charge-2 bracket, N=5", ch, _tol(cfg, 1e-10)))
    return reports


def _check_sites(cfg, N, n):
    if n > cfg.max_sites or N**n > zn_model.MAX_CONFIGS:
        raise ResourceCap(f"{n} sites with N={N} exceed the spin-sum cap")


def _xi_points(cfg, rng, n):
    return _pick(cfg.xi, rng.uniform(0.05, 0.6, n))


def suite_zn_boundary_cr(cfg):
    rng = _rng(cfg, "zn-boundary-cr")
    tol = _tol(cfg, 1e-12)
    bcr, sym = [], []
    for N in _Ns(cfg, 2, 5):
        lam = zn_model.crossing(N)
        us = _pick(cfg.u, _box(rng, lam, 10))
        xis = _xi_points(cfg, rng, len(us))
        for u, xi in zip(us, xis):
            u, xi = float(u), float(xi)
            ph = zn_model.boundary_phase(N) + cfg.perturb
            p = {"N": N, "u": u, "xi": xi}
            bcr.append((zn_model.boundary_cr_residual_zn(N, u, xi, phase=ph), p))
            sym.append((zn_model.boundary_symmetry_residual(N, u, xi, ph), p))
        xc = complex(0.3, 0.2)
        bcr.append((zn_model.boundary_cr_residual_zn(N, 0.3 * lam, xc, phase=zn_model.boundary_phase(N) + cfg.perturb),
                    {"N": N, "u": 0.3 * lam, "xi": xc}))
    reports = [worst("zn boundary CR", bcr, tol), worst("zn boundary table symmetry", sym, tol)]

    pent = []
    al = cfg.alpha if cfg.alpha is not None else 1.0
    be = cfg.beta if cfg.beta is not None else 1.3
    for N in (_Ns(cfg, 2, 3) if cfg.N is None else (cfg.N,)):
        _check_sites(cfg, N, 4)
        lat = zn_model.boundary_strip(N, 2, 2, al, be)
        spec = zn_model.SpinObservableSpec(((0, 0), (0, -1)), zn_model.parafermion_spin(N))
        u = zn_model.cr_u(N, al)
        direct = zn_model.pentagon_contour(lat, u, spec, 0, be)
        xi = zn_model.boundary_parameters(N, al, be)[1] + cfg.perturb
        r = abs(direct - zn_model.pentagon_bracket(lat, u, spec, 0, be, phi_xi=xi))
        pent.append((r, {"N": N, "alpha": al, "beta": be}))
    reports.append(worst("zn pentagon contour vs J(r) form", pent, _tol(cfg, 1e-10)))
    return reports


def suite_zn_boundary_ybe(cfg):
    rng = _rng(cfg, "zn-boundary-ybe")
    pts = []
    for N in _Ns(cfg, 2, 5):
        lam = zn_model.crossing(N)
        us = _pick(cfg.u, _box(rng, lam, 10))
        vs = _pick(cfg.v, _box(rng, lam, len(us)))
        xis = list(_xi_points(cfg, rng, len(us)))
        if cfg.xi is None:
            xis[-1] = complex(xis[-1], 0.2)
        for u, v, xi in zip(us, vs, xis):
            u, v = float(u), float(v)
            Yu = zn_model.boundary_yhat(N, u, xi)
            Yu[1 % N] += cfg.perturb
            r = zn_model.boundary_ybe_residual(N, u, v, xi, Yu=Yu)
            pts.append((r, {"N": N, "u": u, "v": v, "xi": xi}))
    return [worst("zn boundary reflection equation", pts, _tol(cfg, 1e-10))]


def suite_zn_commutation(cfg):
    cases = [(2, 3), (2, 4), (3, 3)] if cfg.N is None else [(cfg.N, cfg.cols or 3)]
    xl = cfg.xi if cfg.xi is not None else 0.1
    xr = cfg.xi if cfg.xi is not None else 0.25
    pts = []
    for N, L in cases:
        if L > cfg.max_sites or N**L > 10**4:
            raise ResourceCap(f"N={N}, L={L} exceeds the dense transfer-matrix cap")
        lam = zn_model.crossing(N)
        grid = [0.2 * lam, 0.45 * lam, 0.8 * lam]

        def YL(x):
            Y = zn_model.boundary_y(N, x, xl).Y.copy()
            Y[0] += cfg.perturb
            return Y

        for u in _pick(cfg.u, grid):
            for v in _pick(cfg.v, grid):
                r = zn_model.two_row_transfer_commutator(N, L, u, v, xl, xr, YL_fn=YL)
                pts.append((r, {"N": N, "L": L, "u": u, "v": v, "xi_L": xl, "xi_R": xr}))
    return [worst("zn two-row transfer matrices commute", pts, _tol(cfg, 1e-10))]


def suite_zn_free_bc(cfg):
    pts = []
    for N in _Ns(cfg, 2, 6):
        lam = zn_model.crossing(N)
        for u in _pick(cfg.u, (0.1, 0.2, 0.3)):
            Y = zn_model.boundary_y(N, u / 2, u / 2 + cfg.perturb).Y
            W = zn_model.fz_weights(N, lam - u).W
            pts.append((float(np.max(np.abs(Y / Y[0] - W / W[0]))), {"N": N, "u": u}))
    return [worst("zn free boundary weights", pts, _tol(cfg, 1e-12))]


RUNNERS = {
    "on-bulk-cr": suite_on_bulk_cr,
    "on-boundary-cr": suite_on_boundary_cr,
    "on-reflection": suite_on_reflection,
    "on-enumeration": suite_on_enumeration,
    "zn-star-triangle": suite_zn_star_triangle,
    "zn-self-duality": suite_zn_self_duality,
    "zn-bulk-cr": suite_zn_bulk_cr,
    "zn-boundary-cr": suite_zn_boundary_cr,
    "zn-boundary-ybe": suite_zn_boundary_ybe,
    "zn-commutation": suite_zn_commutation,
    "zn-free-bc": suite_zn_free_bc,
}


# ---------------------------------------------------------------------------
# driver


def _threads() -> int:
    raw = os.environ.get("LHK_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"LHK_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValueError("LHK_THREADS must be a positive integer")
    return n


def _git_rev() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def run(cfg: SuiteConfig):
    """Run the configured suite(s); returns ``(reports, status, error)``."""
    names = SUITES if cfg.suite == "all" else (cfg.suite,)

    def one(name):
        try:
            return name, RUNNERS[name](cfg), None
        except ResourceCap as exc:
            return name, [], str(exc)

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        done = list(ex.map(one, names))
    reports, errors = [], []
    for name, reps, err in done:
        reports.extend((name, r) for r in reps)
        if err:
            errors.append(f"{name}: {err}")
    if errors:
        return reports, EXIT_CAP, "; ".join(errors)
    ok = all(r.passed for _, r in reports)
    return reports, EXIT_PASS if ok else EXIT_FAIL, None


def _json_default(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(type(v))


def render_json(cfg, reports, status, error) -> str:
    doc = {
        "suite": cfg.suite,
        "git_rev": _git_rev(),
        "config": cfg.to_dict(),
        "results": [dict(r.to_dict(), suite=name) for name, r in reports],
        "passed": status == EXIT_PASS,
    }
    if error:
        doc["resource_cap_exceeded"] = error
    return json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n"


def render_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "identity", "param_point", "residual", "tolerance", "passed"])
    for name, r in reports:
        d = r.to_dict()
        flat = ";".join(f"{k}={json.dumps(v)}" for k, v in d["parameter_point"].items())
        w.writerow([name, d["identity_name"], flat, repr(d["residual"]), repr(d["tolerance"]), d["passed"]])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description="Verify lattice holomorphicity and integrability identities.")
    p.add_argument("suite_pos", nargs="?", choices=SUITES + ("all",), metavar="SUITE", help="suite name (same as --suite)")
    p.add_argument("--suite", choices=SUITES + ("all",))
    p.add_argument("--N", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--u", type=float)
    p.add_argument("--v", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--perturb", type=float, default=0.0, help="offset a weight to produce a control failure")
    p.add_argument("--max-faces", type=int, default=8)
    p.add_argument("--max-sites", type=int, default=12)
    return p


def config_from_args(argv=None):
    p = build_parser()
    a = p.parse_args(argv)
    if a.suite and a.suite_pos and a.suite != a.suite_pos:
        p.error("conflicting suite names")
    suite = a.suite or a.suite_pos
    if suite is None:
        p.error("a suite is required")
    if a.tol is not None and not a.tol > 0:
        p.error("--tol must be positive")
    if a.N is not None and a.N < 2:
        p.error("--N must be at least 2")
    for name in ("alpha", "beta"):
        x = getattr(a, name)
        if x is not None and not 0 < x < math.pi:
            p.error(f"--{name} must lie in (0, pi)")
    for name in ("rows", "cols", "max_faces", "max_sites"):
        x = getattr(a, name)
        if x is not None and x < 1:
            p.error(f"--{name.replace('_', '-')} must be positive")
    return SuiteConfig(
        suite=suite, N=a.N, lam=a.lam, alpha=a.alpha, beta=a.beta, u=a.u, v=a.v, xi=a.xi,
        rows=a.rows, cols=a.cols, tol=a.tol, seed=a.seed, perturb=a.perturb,
        max_faces=a.max_faces, max_sites=a.max_sites,
    ), a


def main(argv=None) -> int:
    try:
        cfg, a = config_from_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        reports, status, error = run(cfg)
    except ValueError as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render_csv(reports) if a.format == "csv" else render_json(cfg, reports, status, error)
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for name, r in reports:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {name}: {r.identity_name} residual={r.residual:.3e} tol={r.tolerance:.0e}", file=sys.stderr)
    if error:
        print(f"verify: resource cap: {error}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
