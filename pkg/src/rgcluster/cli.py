"""Command-line front end: ``rgcluster <subcommand> --config run.yaml``.

Every subcommand writes its tables plus a ``manifest.json`` into the output
directory. Exit status: 0 success, 2 validation failure, 3 cap refusal,
4 numeric error.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bounds, kernels
from .cluster import ClusterExpansion, jacobian_bound, kp_check
from .config import ExperimentConfig, load_config
from .errors import CapExceeded, RGError
from .exact import ExactSystem, jacobian_table
from .io import encode_set, write_json, write_table
from .lattice import image_distance
from .parallel import set_threads
from .polymers import enumerate_polymers
from .tables import config_bits, spin_configs

COMMANDS = ("validate-kernel", "exact", "expand", "kp-check", "bounds", "band-profile", "linearize")


def _subsets(items, k_min: int, k_max: int):
    items = tuple(items)
    for k in range(k_min, min(k_max, len(items)) + 1):
        yield from (tuple(c) for c in itertools.combinations(items, k))


def _context(cfg: ExperimentConfig) -> bounds.BoundsContext:
    J = cfg.interaction()
    b = cfg.blocking()
    return bounds.BoundsContext(cfg.r, cfg.M, b.s, cfg.norm(), D=max(J.body, 1), S=J.range)


def _manifest(cfg: ExperimentConfig, out: Path, command: str, extra: dict | None = None) -> None:
    doc = {
        "command": command,
        "config": cfg.echo(),
        "caps": cfg.caps.model_dump(),
        "versions": {"rgcluster": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }
    if extra:
        doc.update(extra)
    write_json(out / "manifest.json", doc)


def run_validate_kernel(cfg: ExperimentConfig, out: Path) -> int:
    k = cfg.make_kernel()
    report = kernels.validate(k, strict=False)
    rows = [(c.name, c.passed, c.worst, c.witness or "-") for c in report.checks]
    write_table(out / "kernel.tsv", ["axiom", "passed", "worst", "witness"], rows)
    _manifest(cfg, out, "validate-kernel", {"kernel": k.kind, "passed": report.passed})
    if not report.passed:
        failed = ", ".join(f"{c.name} at {c.witness}" for c in report.checks if not c.passed)
        print(f"kernel {k.kind!r} rejected: {failed}", file=sys.stderr)
        return 2
    return 0


def run_exact(cfg: ExperimentConfig, out: Path) -> int:
    b = cfg.blocking()
    J = cfg.interaction()
    caps = cfg.caps
    system = ExactSystem(J, cfg.make_kernel(), b, caps.max_sites, caps.max_image_sites)
    jp = system.couplings()
    Zs = sorted(jp, key=lambda Z: (len(Z), Z))
    write_table(out / "jprime.tsv", ["Z", "value"], [(encode_set(Z, image=True), jp[Z]) for Z in Zs])

    logw = system.log_W()
    rows = []
    for sp in spin_configs(b.blocks):
        exact_v = logw.at(sp)
        recon = jp.evaluate(sp)
        rows.append((config_bits(b.blocks, sp), exact_v, recon, abs(recon - exact_v)))
    write_table(out / "logw.tsv", ["sigma_prime", "log_W", "fourier_sum", "residual"], rows)

    Ws = list(_subsets(b.sites, 1, cfg.jacobian.w_max))
    Zj = list(_subsets(b.blocks, 0, cfg.jacobian.z_max))
    jac = jacobian_table(J, system.kernel, b, Ws, Zj, max_sites=caps.max_sites, max_image_sites=caps.max_image_sites)
    rows = [(encode_set(Z, image=True), encode_set(W), jac[(Z, W)]) for W in Ws for Z in Zj]
    write_table(out / "jacobian.tsv", ["Z", "W", "value"], rows)
    _manifest(cfg, out, "exact", {"fourier_residual": system.fourier_residual()})
    return 0


def run_expand(cfg: ExperimentConfig, out: Path) -> int:
    b = cfg.blocking()
    J = cfg.interaction()
    k = cfg.make_kernel()
    caps = cfg.caps
    polys = enumerate_polymers(J, k, b, n_max=caps.n_max, q_cap=caps.q_cap, guard=caps.guard)
    rows = []
    for p in polys:
        links = sum(n * m for n, m in p.link_counts)
        for sp in spin_configs(p.support):
            rows.append((encode_set(p.support, image=True), config_bits(p.support, sp), p.table.at(sp), links))
    write_table(out / "polymers.tsv", ["N", "sigma_prime", "weight", "links"], rows)

    try:
        exact_logw = ExactSystem(J, k, b, caps.max_sites, caps.max_image_sites).log_W()
    except CapExceeded:
        exact_logw = None
    rows = []
    orders = sorted({p for p in cfg.expand_orders if p <= caps.p_max} | {caps.p_max})
    final = None
    for p_max in orders:
        ce = ClusterExpansion(polys, p_max)
        if exact_logw is None:
            residual = math.nan
        else:
            approx = ce.log_W(b.blocks).lift(exact_logw.sites)
            residual = float(np.max(np.abs(approx.values - exact_logw.values)))
        rows.append((p_max, len(ce.terms), residual))
        final = ce
    write_table(out / "expansion.tsv", ["p_max", "cluster_terms", "max_residual"], rows)
    jp = final.couplings()
    Zs = sorted(jp, key=lambda Z: (len(Z), Z))
    write_table(out / "couplings.tsv", ["Z", "value"], [(encode_set(Z, image=True), jp[Z]) for Z in Zs])
    _manifest(
        cfg,
        out,
        "expand",
        {
            "n_polymers": len(polys),
            "n_hypergraphs": polys.n_hypergraphs,
            "saturated": polys.saturated,
            "polymers_by_size": {str(n): sum(1 for p in polys if len(p.support) == n) for n in range(1, b.n_blocks + 1)},
        },
    )
    return 0


def run_kp(cfg: ExperimentConfig, out: Path) -> int:
    b = cfg.blocking()
    caps = cfg.caps
    polys = enumerate_polymers(cfg.interaction(), cfg.make_kernel(), b, n_max=caps.n_max, q_cap=caps.q_cap, guard=caps.guard)
    rep = kp_check(polys, cfg.M, b)
    rows = [(encode_set([y], image=True), v, rep.log_M, v <= rep.log_M) for y, v in rep.per_site.items()]
    write_table(out / "kp.tsv", ["y", "sum", "log_M", "passed"], rows)
    ctx = _context(cfg)
    cert = {
        "passed": rep.passed,
        "worst": rep.worst,
        "log_M": rep.log_M,
        "M": cfg.M,
        "norm": ctx.norm,
        "threshold": bounds.threshold(ctx),
        "passes_threshold": bounds.passes_threshold(ctx),
        "n_polymers": len(polys),
        "saturated": polys.saturated,
    }
    write_json(out / "certificate.json", cert)
    _manifest(cfg, out, "kp-check")
    if not rep.passed:
        print(f"polymer condition fails: worst site sum {rep.worst:.6g} > log M = {rep.log_M:.6g}", file=sys.stderr)
        return 2
    return 0


def run_bounds(cfg: ExperimentConfig, out: Path) -> int:
    ctx = _context(cfg)
    b = cfg.blocking()
    bs = cfg.bounds
    band = cfg.band
    supports = [X for X in cfg.interaction().supports()]
    Z0 = (b.blocks[0],)
    shells = []
    if supports:
        counts = bounds.shell_counts(b, Z0, supports)
        acc = 0
        for E in range(0, max(counts) + 1):
            acc += counts.get(E, 0)
            shells.append((E, acc))
    report = bounds.build_report(
        ctx,
        n_terms=bs.n_terms,
        P_values=bs.P_values,
        band_args=[(w, band.P, band.Q, band.Kc) for w in range(1, ctx.D + 1)],
        support_counts=shells,
        series=(bs.alpha, b.d),
    ).to_dict()
    report["generating_function"] = None
    report["subexp_profile"] = None
    if ctx.rho < 1:
        z_star = ctx.c**2 / (2 * ctx.s * ctx.norm) if ctx.norm > 0 else 1.0
        g = bounds.generating_check(ctx, 0.5 * z_star, n_max=bs.n_terms)
        report["generating_function"] = {
            "z": g.z,
            "w": g.w,
            "residual": g.residual,
            "partial_sum": g.partial_sums[-1] if g.partial_sums else 0.0,
            "partial_ok": g.partial_ok,
        }
        prof = bounds.subexp_profile(ctx, 1, bs.alpha, bs.beta, bs.l_values)
        report["subexp_profile"] = {
            "alpha": prof.alpha,
            "beta": prof.beta,
            "alpha_prime": prof.alpha_prime,
            "rows": prof.rows,
            "knee": prof.knee,
            "scaled_knee": prof.scaled_knee,
            "log_fitted_C": prof.log_fitted_C,
            "eventually_dominated": prof.eventually_dominated,
        }
    write_json(out / "bounds.json", report)
    _manifest(cfg, out, "bounds")
    return 0


def _measured(cfg: ExperimentConfig, Ws, Zs):
    b = cfg.blocking()
    caps = cfg.caps
    return jacobian_table(
        cfg.interaction(), cfg.make_kernel(), b, Ws, Zs, max_sites=caps.max_sites, max_image_sites=caps.max_image_sites
    )


def band_rows(cfg: ExperimentConfig) -> list:
    """Rows (l, max |dJ'/dJ|, largest |W|, band bound, activation distance, active, global bound)."""
    b = cfg.blocking()
    ctx = _context(cfg)
    Ws = list(_subsets(b.sites, 1, ctx.D))
    Zs = list(_subsets(b.blocks, 1, cfg.jacobian.z_max))
    jac = _measured(cfg, Ws, Zs)
    groups: dict = {}
    for (Z, W), v in jac.items():
        l = image_distance(W, Z, b)
        best, wmax = groups.get(l, (0.0, 0))
        groups[l] = (max(best, abs(v)), max(wmax, len(W)))
    rows = []
    for l in sorted(groups):
        best, wmax = groups[l]
        if ctx.rho < 1:
            bb = bounds.band_bound(ctx, wmax, cfg.band.P, cfg.band.Q, cfg.band.Kc)
            val, act = bb.value, bb.activation_distance
        else:
            val, act = math.nan, math.nan
        rows.append((l, best, wmax, val, act, bool(l > act), jacobian_bound(cfg.M, wmax)))
    return rows


def run_band(cfg: ExperimentConfig, out: Path) -> int:
    rows = band_rows(cfg)
    header = ["l", "max_abs_derivative", "w_size", "band_bound", "activation_distance", "active", "global_bound"]
    write_table(out / "band.tsv", header, rows)
    _manifest(cfg, out, "band-profile")
    return 0


def linearize(cfg: ExperimentConfig, K) -> tuple:
    """L(J)K on image sets up to ``z_max`` and the fitted majorant per entry.

    C_decay = max |dJ'(Z)/dJ(W)| exp(l^alpha) and C_count = max n_l / (l+1)^d
    are fitted over every W with |W| <= D, so that
    |L(J)K(Z)| <= C_decay C_count ||K||_inf sum_l exp(-l^alpha) (l+1)^d
    whenever K is supported on such sets.
    """
    from .exact import apply_linearization

    b = cfg.blocking()
    ctx = _context(cfg)
    alpha = cfg.linearize.alpha
    body = max(ctx.D, max((len(W) for W in K), default=1))
    Ws = sorted(set(_subsets(b.sites, 1, body)) | set(K.supports()))
    Zs = list(_subsets(b.blocks, 1, cfg.jacobian.z_max))
    jac = _measured(cfg, Ws, Zs)
    c_decay, c_count = 0.0, 0.0
    for Z in Zs:
        shells: dict = {}
        for W in Ws:
            l = image_distance(W, Z, b)
            shells[l] = shells.get(l, 0) + 1
            c_decay = max(c_decay, abs(jac[(Z, W)]) * math.exp(l**alpha))
        c_count = max(c_count, max(n / (l + 1) ** b.d for l, n in shells.items()))
    ksup = K.sup_norm
    series = bounds.majorant_series(alpha, b.d)
    bound = bounds.linearization_bound(ctx, ksup, alpha, b.d, c_decay * c_count)
    rows = []
    for Z in Zs:
        v = apply_linearization(jac, K, Z)
        rows.append((Z, v, v / ksup if ksup else 0.0, bound))
    consts = {"C_decay": c_decay, "C_count": c_count, "series": series.value, "series_terms": series.n_terms, "K_sup": ksup}
    return rows, consts


def run_linearize(cfg: ExperimentConfig, out: Path) -> int:
    rows, consts = linearize(cfg, cfg.direction())
    write_table(
        out / "linearization.tsv",
        ["Z", "value", "value_over_Ksup", "bound"],
        [(encode_set(Z, image=True), v, r, bd) for Z, v, r, bd in rows],
    )
    _manifest(cfg, out, "linearize", {"fitted": consts})
    return 0


RUNNERS = {
    "validate-kernel": run_validate_kernel,
    "exact": run_exact,
    "expand": run_expand,
    "kp-check": run_kp,
    "bounds": run_bounds,
    "band-profile": run_band,
    "linearize": run_linearize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rgcluster", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--p-max", type=int, default=None)
        p.add_argument("--n-max", type=int, default=None)
        p.add_argument("--q-cap", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("p_max", args.p_max), ("n_max", args.n_max), ("q_cap", args.q_cap)) if v is not None}
        if overrides:
            cfg = cfg.model_copy(update={"caps": cfg.caps.model_validate({**cfg.caps.model_dump(), **overrides})})
        out = args.out if args.out is not None else cfg.resolve(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        set_threads(args.threads)
        return RUNNERS[args.command](cfg, out)
    except RGError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:  # pydantic override validation
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
