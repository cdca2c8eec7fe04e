"""Verification suites behind the command-line interface.

Each suite turns a validated :class:`~ipps.config.RunConfig` into a
:class:`~ipps.report.Report` and a set of auxiliary text artifacts
(CSV tables, gnuplot scripts).  All output is deterministic given the
configuration and seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import continuum as ct
from .config import RunConfig, emit_config, validate
from .duality import (InitialKernel, ScalarKernelTable, equilibrium_theta, kernel_definitional,
                      kernel_on_lattice_arwpi, kernel_on_lattice_bcrw, kernel_pair_pde_arwpi,
                      kernel_pair_pde_bcrw, stationary_theta)
from .errors import ConfigError, InputError
from .lattice import (ARWPI, BCRW, OccupancyConfig, build_generator, evolve_exact, exact_intensity,
                      sigma_expectation)
from .montecarlo import EstimateWithError, run_replicas
from .pointprocess import (assemble_arwpi_kernel, assemble_bcrw_kernel, empty_interval_pfaffian,
                           identify_product, intensity)
from .report import Report

__all__ = ["RunResult", "run", "build_model", "parse_region", "SCHEMAS"]

# CSV schemas of the auxiliary artifacts, per command (also shown in --help)
SCHEMAS = {
    "report.csv": "name,operation,computed,reference,tolerance,compare,pass,provenance "
                  "(first line is a '#' header with timestamp and seed)",
    "exact-verify": "intensities.csv: t,points,rho_pfaffian,rho_exact,abs_diff",
    "mc-compare": "estimates.csv: t,points,mc_mean,mc_stderr,exact",
    "equilibrium": "kernel.csv: d,K_horizon,K_limit",
    "continuum-table": "kernel_table.csv: t,y,z,K ; intensity.csv: t,y,rho1 ; intensity.gp",
    "convergence-scan": "convergence.csv: eps,err_a,err_b ; convergence.gp",
    "net-solve": "net_table.csv: t,y,z,K_numeric,K_reference",
    "firework": "firework.csv: y,rho1 ; firework.gp",
}


@dataclass
class RunResult:
    report: Report
    artifacts: dict = field(default_factory=dict)


def _g(x: float) -> str:
    return f"{float(x):.17g}"


def _pts(pts) -> str:
    return ";".join(str(p) for p in pts)


def build_model(cfg: RunConfig):
    """Model object described by the configuration."""
    try:
        if cfg.model == "bcrw":
            return BCRW(cfg.p, cfg.q, cfg.l, cfg.r)
        if cfg.m_site >= 0:
            if cfg.m_site >= cfg.n_sites:
                raise InputError(f"m_site {cfg.m_site} outside the window")
            return ARWPI.single_source(cfg.n_sites, cfg.p, cfg.q, cfg.m_site, cfg.m)
        return ARWPI.homogeneous(cfg.n_sites, cfg.p, cfg.q, cfg.m)
    except InputError as exc:
        raise ConfigError(f"model: {exc}") from None


def parse_region(text: str) -> list:
    """``R`` (whole line), ``empty``, or ``lo:hi;lo:hi`` open intervals."""
    t = text.strip()
    if t in ("R", "all"):
        return [(-math.inf, math.inf)]
    if t in ("", "empty", "none"):
        return []
    out = []
    for part in t.split(";"):
        try:
            lo, hi = (float(x) for x in part.split(":"))
        except ValueError:
            raise ConfigError(f"region: cannot parse {part!r} (expected lo:hi)") from None
        if not lo < hi:
            raise ConfigError(f"region: empty interval {part!r}")
        out.append((lo, hi))
    return out


def _initial(cfg: RunConfig) -> OccupancyConfig:
    try:
        return OccupancyConfig.named(cfg.initial, cfg.n_sites)
    except InputError as exc:
        raise ConfigError(f"initial: {exc}") from None


def _lattice_points(cfg: RunConfig) -> list:
    if cfg.points:
        pts = sorted({int(round(x)) for x in cfg.points})
        if pts[0] < 0 or pts[-1] >= cfg.n_sites:
            raise ConfigError("points: lattice points must lie in the window")
        return pts
    return list(range(1, cfg.n_sites - 1))


def _kernel_tables(model, eta0, times):
    K0 = InitialKernel.for_model(model, eta0)
    if model.kind == "bcrw":
        return kernel_pair_pde_bcrw(model, K0, times), "kernel_pair_pde_bcrw"
    return kernel_pair_pde_arwpi(model, K0, times), "kernel_pair_pde_arwpi"


def _assemble(model, table):
    if model.kind == "bcrw":
        return assemble_bcrw_kernel(table, model.phi)
    return assemble_arwpi_kernel(table)


def _interval_tuples(n: int) -> list:
    cand = [(1, 3), (0, n), (1, 3, 4, 7), (0, 2, 2, 5), (1, 2, 4, 6, 7, 9), (0, 1, 3, 5, 8, 10)]
    return [ys for ys in cand if ys[-1] <= n]


# -- suites --------------------------------------------------------------------

def _exact_verify(cfg: RunConfig, rep: Report, art: dict):
    model = build_model(cfg)
    eta0 = _initial(cfg)
    tol = cfg.tolerance or 1e-9
    times = list(cfg.times)
    dists = evolve_exact(build_generator(model, cfg.n_sites), eta0, times)
    tables, op = _kernel_tables(model, eta0, times)
    defs = kernel_definitional(model, eta0, times)
    pts = _lattice_points(cfg)
    kind = "empty" if model.kind == "bcrw" else "spin"
    phi = model.phi if model.kind == "bcrw" else 1.0
    lines = ["t,points,rho_pfaffian,rho_exact,abs_diff"]
    for t, dist, tab, dtab in zip(times, dists, tables, defs):
        rep.add(f"kernel-routes[t={t:g}]", op, tab.max_abs_diff(dtab), 0.0, tol, "exact-oracle")
        ker = _assemble(model, tab)
        for n in range(1, cfg.n_max + 1):
            for sub in itertools.combinations(pts, n):
                a = intensity(ker, sub)
                b = exact_intensity(dist, sub)
                lines.append(f"{t:g},{_pts(sub)},{_g(a)},{_g(b)},{_g(abs(a - b))}")
                rep.add(f"rho[t={t:g}]({_pts(sub)})", "intensity", a, b, tol, "exact-oracle")
        for ys in _interval_tuples(cfg.n_sites):
            phase = phi ** sum(b - a for a, b in zip(ys[0::2], ys[1::2]))
            lhs = phase * sigma_expectation(dist, ys, kind)
            rep.add(f"interval-pfaffian[t={t:g}]({_pts(ys)})", "empty_interval_pfaffian",
                    empty_interval_pfaffian(tab, ys), lhs, tol, "exact-oracle")
    art["intensities.csv"] = "\n".join(lines) + "\n"


def _mc_compare(cfg: RunConfig, rep: Report, art: dict):
    model = build_model(cfg)
    eta0 = _initial(cfg)
    k = cfg.tolerance or 4.0
    pts = _lattice_points(cfg)
    obs = [("intensity", (x,)) for x in pts]
    obs += [("intensity", (a, b)) for a, b in zip(pts, pts[1:])]
    obs += [("intensity", (a, b)) for a, b in zip(pts, pts[2:])]
    dists = evolve_exact(build_generator(model, cfg.n_sites), eta0, list(cfg.times))
    lines = ["t,points,mc_mean,mc_stderr,exact"]
    for i, (t, dist) in enumerate(zip(cfg.times, dists)):
        seed = (cfg.seed + i * 0x9E3779B97F4A7C15) % 2 ** 64
        vals = run_replicas(model, eta0, t, cfg.replicas, seed, obs)
        for j, (_, sub) in enumerate(obs):
            est = EstimateWithError.from_samples(vals[:, j])
            ref = exact_intensity(dist, sub)
            lines.append(f"{t:g},{_pts(sub)},{_g(est.mean)},{_g(est.stderr)},{_g(ref)}")
            rep.add(f"mc-rho[t={t:g}]({_pts(sub)})", "estimate_intensity", est.mean, ref,
                    k * est.stderr + 1e-15, "monte-carlo")
    art["estimates.csv"] = "\n".join(lines) + "\n"


def _equilibrium(cfg: RunConfig, rep: Report, art: dict):
    tol = cfg.tolerance or 1e-6
    T = cfg.horizon
    d_max = 60
    n = 8
    lines = ["d,K_horizon,K_limit"]
    if cfg.model == "arwpi":
        m, p, q = cfg.m, cfg.p, cfg.q
        if m <= 0:
            raise ConfigError("m: equilibrium needs positive immigration")
        _, hat = equilibrium_theta(m, p, q)
        c = 2.0 * m / (p + q)
        root = optimize.brentq(lambda th: th + 1.0 / th - 2.0 - c, 1e-300, 1.0 - 1e-15,
                               xtol=1e-16) if c > 0 else 1.0
        rep.add("theta_hat", "equilibrium_theta", hat, 0.5 * (1.0 - root), 1e-12, "closed-form")
        if (m, p, q) == (1.0, 1.0, 1.0):
            rep.add("theta_hat-quoted", "equilibrium_theta", hat, 0.3090170, 1e-6, "paper-value")
        theta, shat = stationary_theta(m, p, q)
        K = kernel_on_lattice_arwpi(p, q, m, T, d_max)
        limit = theta ** np.arange(d_max + 1, dtype=float)
        rep.add(f"kernel[t={T:g}]-vs-limit", "kernel_on_lattice_arwpi",
                float(np.max(np.abs(K - limit))), 0.0, tol, "closed-form")
        vals = np.array([[theta ** abs(z - y) for z in range(n + 1)] for y in range(n + 1)])
        ker = assemble_arwpi_kernel(ScalarKernelTable(n, math.inf, vals))
        law = identify_product(ker, range(1, n - 1), 3)
        rep.add("stationary-bernoulli", "identify_product",
                law.c if law.c is not None else math.nan, shat, 1e-12, "closed-form",
                passed=law.kind == "bernoulli" and abs(law.c - shat) <= 1e-12)
        Kw = K
    else:
        model = build_model(cfg)
        phi = model.phi
        Kw = kernel_on_lattice_bcrw(model, T, d_max, initial="full")
        limit = phi ** -np.arange(d_max + 1, dtype=float)
        rep.add(f"kernel[t={T:g}]-vs-limit", "kernel_on_lattice_bcrw",
                float(np.max(np.abs(Kw[:20] - limit[:20]))), 0.0, tol, "closed-form")
        vals = np.array([[Kw[abs(z - y)] for z in range(n + 1)] for y in range(n + 1)])
        ker = assemble_bcrw_kernel(ScalarKernelTable(n, T, vals), phi)
        rho = intensity(ker, (n // 2,))
        rep.add(f"rho1[t={T:g}]", "intensity", rho, 1.0 - phi ** -2, tol, "closed-form")
        law = identify_product(ker, range(1, n - 1), 3, rtol=1e-6)
        rep.add("limit-bernoulli", "identify_product",
                law.c if law.c is not None else math.nan, 1.0 - phi ** -2, tol, "closed-form",
                passed=law.kind == "bernoulli" and abs(law.c - (1.0 - phi ** -2)) <= tol)
    for d in range(min(d_max, 20) + 1):
        lines.append(f"{d},{_g(Kw[d])},{_g(limit[d])}")
    art["kernel.csv"] = "\n".join(lines) + "\n"


def _continuum_points(cfg: RunConfig, default):
    return sorted(cfg.points) if cfg.points else list(default)


def _continuum_table(cfg: RunConfig, rep: Report, art: dict):
    kind = cfg.kernel
    tol = cfg.tolerance or 1e-8
    tab = ["t,y,z,K"]
    dens = ["t,y,rho1"]
    if kind == "firework":
        pts = _continuum_points(cfg, [-2.0, -1.0, 1.0, 2.0])
        if any(abs(x) < cfg.delta for x in pts):
            raise ConfigError(f"points: firework needs |y| >= delta = {cfg.delta}")
        ker = ct.firework_kernel(cfg.delta)
        for y, z in itertools.combinations_with_replacement(pts, 2):
            tab.append(f"inf,{_g(y)},{_g(z)},{_g(ct.firework_stationary(y, z, cfg.delta))}")
        for y in pts:
            dens.append(f"inf,{_g(y)},{_g(intensity(ker, (y,)))}")
        ref12 = 1.0 - 2.0 / math.pi * (math.pi / 2.0 - 2.0 * math.atan(0.5))
        rep.add("K(1;2)", "firework_stationary", ct.firework_stationary(1.0, 2.0, cfg.delta),
                ref12, 1e-12, "closed-form")
        rep.add("rho1(1)", "firework_intensity", ct.firework_intensity(1.0, cfg.delta),
                1.0 / math.pi, 1e-10, "paper-value")
        rep.add("K(-1;2)", "firework_stationary", ct.firework_stationary(-1.0, 2.0, cfg.delta),
                0.0, 0.0, "paper-value", compare="le")
    else:
        pts = _continuum_points(cfg, [-1.0, -0.5, 0.0, 0.3, 1.0, 2.0])
        for t in cfg.times:
            P = ct.ContinuumParams(cfg.alpha, cfg.beta, t)
            if kind == "a":
                f, ker = ct.kernel_a, ct.kernel_a_pfaffian(P)
            elif kind == "b":
                f, ker = ct.kernel_b, ct.kernel_b_pfaffian(P)
            elif kind == "c":
                f, ker = ct.kernel_c, ct.kernel_c_pfaffian(P)
            else:
                ker = ct.poisson_kernel(cfg.alpha, cfg.beta)
                k = P.k

                def f(_, y, z, k=k):
                    return math.exp(-k * (z - y))
            for y, z in itertools.combinations_with_replacement(pts, 2):
                tab.append(f"{t:g},{_g(y)},{_g(z)},{_g(f(P, y, z))}")
            for y in pts:
                dens.append(f"{t:g},{_g(y)},{_g(intensity(ker, (y,)))}")
            for y in pts:
                rep.add(f"K(y;y)[t={t:g}](y={y:g})", f"kernel_{kind}", f(P, y, y), 1.0, tol,
                        "closed-form")
            if kind in ("a", "b"):
                for y, z in itertools.combinations(pts, 2):
                    qd = ct.kernel_fk_quadrature(P, z - y, start="unit" if kind == "a" else "zero")
                    rep.add(f"K[t={t:g}]({y:g};{z:g})", f"kernel_{kind}", f(P, y, z), qd, tol,
                            "exact-oracle")
            if kind == "a" and t > 0:
                rep.add(f"density_a[t={t:g}]", "density_a", ct.density_a(P), ct.density_a_erf(P),
                        tol, "closed-form")
            if kind == "poisson":
                law = identify_product(ker, pts, 3)
                rep.add("poisson-rate", "identify_product",
                        law.c if law.c is not None else math.nan, 0.5 * P.k, tol, "closed-form",
                        passed=law.kind == "poisson" and abs(law.c - 0.5 * P.k) <= tol)
    art["kernel_table.csv"] = "\n".join(tab) + "\n"
    art["intensity.csv"] = "\n".join(dens) + "\n"
    art["intensity.gp"] = ct.gnuplot_script("intensity.csv", f"one-point intensity, kernel {kind}",
                                            "y", "rho1", [(2, 3, "rho1")])


def _convergence_scan(cfg: RunConfig, rep: Report, art: dict):
    P = ct.ContinuumParams(cfg.alpha, cfg.beta, cfg.times[-1])
    eps = sorted(cfg.eps, reverse=True)
    errs = {ex: [ct.lattice_continuum_error(ex, P, e) for e in eps] for ex in ("a", "b")}
    lines = ["eps,err_a,err_b"]
    for i, e in enumerate(eps):
        lines.append(f"{_g(e)},{_g(errs['a'][i])},{_g(errs['b'][i])}")
    for ex in ("a", "b"):
        for i in range(len(eps) - 1):
            # error reduction per halving of eps: 2 for first order, 4 for second
            expo = math.log(2.0) / math.log(eps[i] / eps[i + 1])
            ratio = (errs[ex][i] / errs[ex][i + 1]) ** expo
            rep.add(f"error-ratio-{ex}({eps[i]:g}/{eps[i + 1]:g})", "lattice_continuum_error",
                    ratio, cfg.tolerance or 1.7, 0.0, "closed-form", compare="ge")
    art["convergence.csv"] = "\n".join(lines) + "\n"
    art["convergence.gp"] = ct.gnuplot_script("convergence.csv", "lattice to continuum error",
                                              "eps", "max abs error",
                                              [(1, 2, "example a"), (1, 3, "example b")],
                                              logscale="xy")


def _net_solve(cfg: RunConfig, rep: Report, art: dict):
    A = parse_region(cfg.region)
    b = cfg.b
    tol = cfg.tolerance or 1e-6
    lines = ["t,y,z,K_numeric,K_reference"]
    P = ct.ContinuumParams(alpha=0.5, beta=b * b / 2.0)
    whole = A == [(-math.inf, math.inf)]
    for t in cfg.times:
        try:
            sol = ct.solve_net(b, t, A, h=cfg.grid_h, dt=cfg.grid_dt, U=cfg.net_u, V=cfg.net_v)
        except InputError as exc:
            raise ConfigError(f"net-solve: {exc}") from None
        notes = rep.notes.setdefault("net_domain", {})
        notes[f"t={t:g}"] = {"U": sol.domain[0], "V": sol.domain[1], "h": cfg.grid_h,
                                 "dt": cfg.grid_dt}
        # 50 x 50 interior solver nodes: no interpolation error enters the check
        iu = np.unique(np.linspace(1, sol.u.size - 2, 50).round().astype(int))
        iv = np.unique(np.linspace(1, sol.v.size - 2, 50).round().astype(int))
        Y, Z = (a[np.ix_(iu, iv)] for a in sol.nodes())
        val = sol.K[np.ix_(iu, iv)]
        Pt = ct.ContinuumParams(P.alpha, P.beta, t)
        if whole:
            ref = ct.kernel_b(Pt, Y, Z)
        elif not A:
            ref = ct.kernel_a(Pt, Y, Z)
        else:
            ref = np.full(val.shape, np.nan)
        worst = float(np.max(np.abs(val - ref))) if (whole or not A) else math.nan
        for y, z, kv, kr in zip(Y.ravel(), Z.ravel(), val.ravel(), ref.ravel()):
            lines.append(f"{t:g},{_g(y)},{_g(z)},{_g(kv)},{_g(kr)}")
        if whole or not A:
            rep.add(f"net-vs-closed-form[t={t:g}]", "solve_net", worst, 0.0, tol, "closed-form")
        rep.add(f"net-residual[t={t:g}]", "solve_net", sol.residual, 0.0, 1e-4, "exact-oracle",
                compare="le")
        rep.add(f"net-diagonal[t={t:g}]", "solve_net", float(np.max(np.abs(sol.K[0] - 1.0))),
                0.0, 1e-8, "closed-form")
    art["net_table.csv"] = "\n".join(lines) + "\n"


def _firework(cfg: RunConfig, rep: Report, art: dict):
    d = cfg.delta
    ker = ct.firework_kernel(d)
    pts = _continuum_points(cfg, [-3.0, -1.5, -0.5, 0.5, 1.0, 2.0])
    if any(abs(x) < d for x in pts):
        raise ConfigError(f"points: firework needs |y| >= delta = {d}")
    rep.add("rho1(1)", "firework_intensity", ct.firework_intensity(1.0, d), 1.0 / math.pi,
            1e-10, "paper-value")
    rep.add("K(1;2)", "firework_stationary", ct.firework_stationary(1.0, 2.0, d),
            1.0 - 2.0 / math.pi * (math.pi / 2.0 - 2.0 * math.atan(0.5)), 1e-12, "closed-form")
    for y, z in itertools.combinations(pts, 2):
        if y < 0 < z:
            rep.add(f"K({y:g};{z:g})-across-origin", "firework_stationary",
                    abs(ct.firework_stationary(y, z, d)), 0.0, 0.0, "paper-value", compare="le")
            r2 = intensity(ker, (y, z))
            rep.add(f"rho2({y:g};{z:g})-factorizes", "intensity", r2,
                    intensity(ker, (y,)) * intensity(ker, (z,)), 1e-10, "closed-form")
        else:
            rep.add(f"K({y:g};{z:g})-reflection", "firework_stationary",
                    ct.firework_stationary(y, z, d), ct.firework_stationary(-z, -y, d), 1e-14,
                    "closed-form")
    fb = ct.firework_finite_beta(1.0, 1e4, 1.0, 2.0)
    rep.add("finite-beta(1;2)", "firework_finite_beta", fb, ct.firework_stationary(1.0, 2.0, d),
            1e-3, "closed-form")
    lines = ["y,rho1"]
    for y in np.linspace(max(d, 0.25), 4.0, 16):
        lines.append(f"{_g(y)},{_g(ct.firework_intensity(float(y), d))}")
    art["firework.csv"] = "\n".join(lines) + "\n"
    art["firework.gp"] = ct.gnuplot_script("firework.csv", "firework intensity", "y", "rho1",
                                           [(1, 2, "rho1")], logscale="y")


_SUITES = {
    "exact-verify": _exact_verify,
    "mc-compare": _mc_compare,
    "equilibrium": _equilibrium,
    "continuum-table": _continuum_table,
    "convergence-scan": _convergence_scan,
    "net-solve": _net_solve,
    "firework": _firework,
}


def run(cfg: RunConfig) -> RunResult:
    """Validate ``cfg`` and execute its suite."""
    validate(cfg)
    rep = Report(cfg.command, config_text=emit_config(cfg), seed=cfg.seed)
    art: dict = {}
    _SUITES[cfg.command](cfg, rep, art)
    return RunResult(rep, art)
