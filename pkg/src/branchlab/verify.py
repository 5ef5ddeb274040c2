"""The one-shot verification suite.

Every check the package makes about its own mathematics lives here as a
named registry entry with an explicit numeric budget. verify_suite runs
the registry in order and returns a manifest dictionary; the manifest
embeds a hash of its seed-determined core, so two runs with the same
master seed must agree byte for byte no matter how many workers they
used.

Budgets are engineering choices sized so that a correct implementation
passes with wide margin at the configured sample sizes; quick mode cuts
the sample sizes and records correspondingly widened budgets.
"""
from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import partial

import numpy as np

from ._version import __version__
from .cmj import count_generation, simulate_cmj, simulate_embedded_rrt
from .distributions import make_distribution
from .errors import BranchLabError
from .fileio import canonical_json_bytes
from .gaussian_limit import build_cov_matrix, cov_rkl, cov_rkl_integral, sample_limit
from .recursive_tree import (
    depths_from_parents,
    exact_profile_distribution,
    generate_parent_matrix,
    generate_rrt,
    level1_moments,
    level_counts_batch,
)
from .renewal import (
    build_renewal_table,
    lorden_check,
    moment_ratio,
    second_moment_rhs,
    uk_bound_check,
    yk3_exact,
)
from .rng import RngStream, mix64
from .runner import map_replicated
from .stat_tests import (
    empirical_cov,
    functional_grid_test,
    ks_one_sample,
    ks_two_sample,
    normalize_cmj,
    normalize_tree_profile,
)

_TWO_SAMPLE_CRIT = 1.9495  # sqrt(-ln(alpha/2)/2) at alpha = 0.001


@dataclass(frozen=True)
class VerifyConfig:
    master_seed: int = 42
    workers: int = 1
    quick: bool = False


def _entry(
    name: str,
    statistic,
    budget,
    gating: bool,
    p_value=None,
    n_eff=None,
    details=None,
    skipped: bool = False,
):
    stat = None if statistic is None else float(statistic)
    ok = (
        not skipped
        and stat is not None
        and math.isfinite(stat)
        and budget is not None
        and stat <= budget
    )
    return {
        "name": name,
        "statistic": stat if stat is None or math.isfinite(stat) else None,
        "budget": None if budget is None else float(budget),
        "p_value": None if p_value is None else float(p_value),
        "n_eff": None if n_eff is None else float(n_eff),
        "pass": bool(ok),
        "gating": bool(gating),
        "skipped": bool(skipped),
        "details": details if details else {},
    }


# ---------------------------------------------------------------------------
# replicate tasks (module level so worker processes can unpickle them)


def _embedding_task(rep, rng, n, k_hi):
    direct = depths_from_parents(generate_rrt(n + 1, rng).parent)
    emb = depths_from_parents(simulate_embedded_rrt(n, rng).tree.parent)
    out = np.empty(2 * k_hi, dtype=float)
    for k in range(1, k_hi + 1):
        out[k - 1] = np.count_nonzero(direct == k)
        out[k_hi + k - 1] = np.count_nonzero(emb == k)
    return out


def _cmj_clt_task(rep, rng, dist, horizon, k_max):
    traj = simulate_cmj(dist, horizon, k_max, rng)
    return np.array(
        [count_generation(traj, k, horizon) for k in range(1, k_max + 1)], dtype=float
    )


def _tree_batch_task(rep, rng, n_plus_1, k_hi, n_trees):
    parents = generate_parent_matrix(n_trees, n_plus_1, rng)
    return level_counts_batch(parents, k_hi).astype(float)


def _probe_task(rep, rng, dist, horizon, n):
    traj = simulate_cmj(dist, horizon, 2, rng)
    d = depths_from_parents(generate_rrt(n + 1, rng).parent)
    return np.array(
        [
            count_generation(traj, 1, horizon),
            count_generation(traj, 2, horizon),
            float(np.count_nonzero(d == 1)),
            float(np.count_nonzero(d == 2)),
            rng.gen.random(),
        ]
    )


# ---------------------------------------------------------------------------
# registry tests


def _test_cov_closed_form(cfg, seed):
    orders = range(1, 6)
    times = (0.5, 1.0, 2.0)
    worst_int = 0.0
    for k in orders:
        for l in orders:
            for s in times:
                for u in times:
                    dev = abs(cov_rkl(k, l, s, u) - cov_rkl_integral(k, l, s, u))
                    worst_int = max(worst_int, dev)
    worst_unit = max(
        abs(cov_rkl(k, l, 1.0, 1.0) - 1.0 / (k + l - 1)) for k in orders for l in orders
    )
    worst_diag = 0.0
    for k in orders:
        for s in times:
            target = s ** (2 * k - 1) / (2 * k - 1)
            worst_diag = max(worst_diag, abs(cov_rkl(k, k, s, s) - target) / target)
    return [
        _entry("cov_closed_form.vs_quadrature", worst_int, 1e-10, True),
        _entry("cov_closed_form.unit_time_identity", worst_unit, 1e-12, True),
        _entry("cov_closed_form.diagonal_relative", worst_diag, 1e-12, True),
    ]


def _test_embedding_ks(cfg, seed):
    n, k_hi = 500, 3
    m = 1000 if cfg.quick else 5000
    task = partial(_embedding_task, n=n, k_hi=k_hi)
    rows = map_replicated(task, m, seed, workers=cfg.workers)
    budget = _TWO_SAMPLE_CRIT * math.sqrt(2.0 / m)
    out = []
    for k in range(1, k_hi + 1):
        rep = ks_two_sample(rows[:, k - 1], rows[:, k_hi + k - 1])
        out.append(
            _entry(
                f"embedding_ks.level{k}",
                rep.statistic,
                budget,
                True,
                p_value=rep.p_value,
                n_eff=rep.n_eff,
                details={"n": n, "n_reps": m},
            )
        )
    return out


def _cmj_clt_entries(cfg, seed, label, dist):
    horizon, k_max = 200.0, 2
    m = 400 if cfg.quick else 2000
    budget = 0.12 if cfg.quick else 0.08
    task = partial(_cmj_clt_task, dist=dist, horizon=horizon, k_max=k_max)
    rows = map_replicated(task, m, seed, workers=cfg.workers)
    out = []
    for k in range(1, k_max + 1):
        z = normalize_cmj(rows[:, k - 1], horizon, k, dist.mu, dist.sigma2)
        rep = ks_one_sample(z * math.sqrt(2 * k - 1), "normal(0,1)")
        out.append(
            _entry(
                f"{label}.k{k}",
                rep.statistic,
                budget,
                True,
                p_value=rep.p_value,
                n_eff=rep.n_eff,
                details={"horizon": horizon, "n_reps": m, "law": dist.descriptor},
            )
        )
    return out


def _test_cmj_clt_exp(cfg, seed):
    return _cmj_clt_entries(cfg, seed, "cmj_clt_exp", make_distribution("exp(1)"))


def _test_cmj_clt_gamma(cfg, seed):
    return _cmj_clt_entries(cfg, seed, "cmj_clt_gamma", make_distribution("gamma(2,2)"))


def _test_functional_grid_exp(cfg, seed):
    m = 400 if cfg.quick else 2000
    marg_budget = 0.12 if cfg.quick else 0.08
    report = functional_grid_test(
        "cmj",
        (0.5, 1.0),
        k_max=2,
        n_reps=m,
        seed=seed,
        workers=cfg.workers,
        dist=make_distribution("exp(1)"),
        horizon=200.0,
    )
    details = {
        "n_reps": m,
        "grid": list(report.t_grid),
        "min_marginal_p": report.min_marginal_p,
    }
    return [
        _entry(
            "functional_grid_exp.marginal_worst",
            report.max_marginal_stat,
            marg_budget,
            True,
            p_value=report.min_marginal_p,
            n_eff=m,
            details=details,
        ),
        _entry(
            "functional_grid_exp.cov_dev_se",
            report.max_cov_dev_se,
            4.0,
            True,
            n_eff=m,
            details={"n_reps": m},
        ),
    ]


def _test_profile_small_n_tv(cfg, seed):
    m = 20_000 if cfg.quick else 100_000
    budget = 0.02 if cfg.quick else 0.01
    rng = RngStream(seed, 0)
    out = []
    for n_plus_1 in range(3, 8):
        exact = exact_profile_distribution(n_plus_1)
        k_hi = n_plus_1 - 1
        counts = level_counts_batch(generate_parent_matrix(m, n_plus_1, rng), k_hi)
        keys, tallies = np.unique(counts, axis=0, return_counts=True)
        emp = {tuple(int(v) for v in row): c / m for row, c in zip(keys, tallies)}
        support = set(exact) | set(emp)
        tv = 0.5 * sum(abs(emp.get(p, 0.0) - exact.get(p, 0.0)) for p in support)
        out.append(
            _entry(
                f"profile_small_n_tv.n{n_plus_1}",
                tv,
                budget,
                True,
                n_eff=m,
                details={"support_exact": len(exact)},
            )
        )
    return out


def _test_level1_moments(cfg, seed):
    n = 10_000
    m = 800 if cfg.quick else 4000
    rng = RngStream(seed, 0)
    mean_exact, var_exact = level1_moments(n)
    counts = np.empty(m, dtype=float)
    done = 0
    while done < m:
        rows = min(256, m - done)
        parents = generate_parent_matrix(rows, n + 1, rng)
        counts[done : done + rows] = np.count_nonzero(parents == 0, axis=1)
        done += rows
    mean_emp = float(counts.mean())
    var_emp = float(counts.var(ddof=1))
    centered = counts - mean_emp
    se_mean = float(counts.std(ddof=1)) / math.sqrt(m)
    m4 = float(np.mean(centered**4))
    se_var = math.sqrt(max(m4 - var_emp**2, 0.0) / m)
    return [
        _entry(
            "level1_moments.mean_dev_se",
            abs(mean_emp - mean_exact) / se_mean,
            4.0,
            True,
            n_eff=m,
            details={"n": n, "mean_exact": mean_exact, "mean_emp": mean_emp},
        ),
        _entry(
            "level1_moments.var_dev_se",
            abs(var_emp - var_exact) / se_var,
            4.0,
            True,
            n_eff=m,
            details={"n": n, "var_exact": var_exact, "var_emp": var_emp},
        ),
    ]


def _test_limit_sampler_cov(cfg, seed):
    m = 5000 if cfg.quick else 20_000
    cov = build_cov_matrix(3, (0.5, 1.0))
    draw = sample_limit(cov, m, RngStream(seed, 0))
    emp, se = empirical_cov(draw.samples, index=cov.index)
    dev = np.abs(emp.matrix - cov.matrix)
    with np.errstate(invalid="ignore"):
        ratio = np.where(se > 0, dev / np.where(se > 0, se, 1.0), 0.0)
    return [
        _entry(
            "limit_sampler_cov.dev_se",
            float(ratio.max()),
            4.0,
            True,
            n_eff=m,
            details={"dim": len(cov.index), "jitter": draw.jitter},
        )
    ]


def _test_renewal_exp(cfg, seed):
    dist = make_distribution("exp(1)")
    table = build_renewal_table(dist, 50.0, h=0.01, k_max=2)
    t = table.grid
    u1_dev = float(np.max(np.abs(table.uk[0] - t)))
    u2_dev = float(np.max(np.abs(table.uk[1] - t**2 / 2.0)))
    yk3_worst = max(abs(yk3_exact(table, 2, x)) for x in (5.0, 12.5, 25.0, 37.5, 50.0))
    return [
        _entry("renewal_exp.u1_dev", u1_dev, 0.1, True),
        _entry("renewal_exp.u2_dev", u2_dev, 0.5, True),
        _entry("renewal_exp.drift_term_zero", yk3_worst, 1e-3, True),
    ]


def _test_renewal_gamma(cfg, seed):
    dist = make_distribution("gamma(2,2)")
    table = build_renewal_table(dist, 50.0, h=0.01, k_max=3)
    tol = 1e-3
    lo, hi = lorden_check(table)
    band_violation = max(-1.0 - lo, hi - dist.sigma2 / dist.second_moment)
    return [
        _entry(
            "renewal_gamma.lorden_band",
            band_violation,
            tol,
            True,
            details={"min_dev": lo, "max_dev": hi},
        ),
        _entry("renewal_gamma.uk_bound_k2", uk_bound_check(table, 2), tol, True),
        _entry("renewal_gamma.uk_bound_k3", uk_bound_check(table, 3), tol, True),
    ]


def _shot_noise_second_moment(dist, table, k, t, m, rng):
    """Monte Carlo mean and SE of (sum_j U_{k-1}(t - S_j) 1{S_j <= t})^2."""
    mu_steps = t / dist.mu
    cols = int(mu_steps + 10.0 * math.sqrt(max(mu_steps, 1.0) * dist.sigma2 / dist.mu**2) + 32)
    vals = np.empty(m, dtype=float)
    done = 0
    while done < m:
        rows = min(max(1, 2_000_000 // cols), m - done)
        c = cols
        while True:
            cs = np.cumsum(dist.sample(rng, (rows, c)), axis=1)
            if bool(np.all(cs[:, -1] > t)):
                break
            c *= 2
        inside = cs <= t
        contrib = np.where(inside, np.interp(np.maximum(t - cs, 0.0), table.grid, table.uk[k - 2]), 0.0)
        shot = contrib.sum(axis=1)
        vals[done : done + rows] = shot**2
        done += rows
    return float(vals.mean()), float(vals.std(ddof=1)) / math.sqrt(m)


def _test_second_moment_identity(cfg, seed):
    dist = make_distribution("exp(1)")
    k, t = 2, 5.0
    target = 625.0 / 4.0 + 125.0 / 3.0
    table = build_renewal_table(dist, t, h=0.01, k_max=k)
    rhs = second_moment_rhs(table, k, t)
    m = 20_000 if cfg.quick else 100_000
    mc, se = _shot_noise_second_moment(dist, table, k, t, m, RngStream(seed, 0))
    return [
        _entry(
            "second_moment_identity.grid_vs_closed_form",
            abs(rhs - target),
            0.01,
            True,
            details={"rhs": rhs, "closed_form": target},
        ),
        _entry(
            "second_moment_identity.mc_dev_se",
            abs(mc - rhs) / se,
            3.0,
            True,
            n_eff=m,
            details={"mc": mc, "rhs": rhs, "se": se},
        ),
    ]


def _moment_ratio_entries(cfg, seed, label, descriptor, t, halfwidth_full, halfwidth_quick):
    dist = make_distribution(descriptor)
    m = 5000 if cfg.quick else 20_000
    half = halfwidth_quick if cfg.quick else halfwidth_full
    table = None
    if dist.kind != "exp":
        table = build_renewal_table(dist, t, h=0.01, k_max=1)
    ratio = moment_ratio(dist, t, 2.0, m, RngStream(seed, 0), table=table)
    return [
        _entry(
            f"{label}.ratio",
            abs(ratio - 1.0),
            half,
            True,
            n_eff=m,
            details={"ratio": ratio, "t": t, "p": 2.0, "law": descriptor},
        )
    ]


def _test_moment_ratio_exp(cfg, seed):
    return _moment_ratio_entries(cfg, seed, "moment_ratio_exp", "exp(1)", 200.0, 0.05, 0.10)


def _test_moment_ratio_gamma(cfg, seed):
    return _moment_ratio_entries(cfg, seed, "moment_ratio_gamma", "gamma(2,2)", 500.0, 0.07, 0.12)


def _test_worker_determinism(cfg, seed):
    task = partial(_probe_task, dist=make_distribution("exp(1)"), horizon=4.0, n=200)
    reps = 48
    serial = map_replicated(task, reps, seed, workers=1)
    pooled = map_replicated(task, reps, seed, workers=max(2, min(cfg.workers, 4)))
    same = serial.tobytes() == pooled.tobytes()
    return [
        _entry(
            "worker_determinism.probe",
            0.0 if same else 1.0,
            0.0,
            True,
            n_eff=reps,
            details={"replicates": reps},
        )
    ]


def _test_tree_profile_direct(cfg, seed):
    n_plus_1 = 100_001
    trees_per_rep = 50
    reps = 8 if cfg.quick else 40
    m = reps * trees_per_rep
    task = partial(_tree_batch_task, n_plus_1=n_plus_1, k_hi=2, n_trees=trees_per_rep)
    rows = map_replicated(task, reps, seed, workers=cfg.workers)
    counts = rows.reshape(m, 2)
    out = []
    for k in (1, 2):
        z = normalize_tree_profile(counts[:, k - 1], n_plus_1 - 1, k)
        rep = ks_one_sample(z * math.sqrt(2 * k - 1), "normal(0,1)")
        out.append(
            _entry(
                f"tree_profile_direct.k{k}",
                rep.statistic,
                0.15,
                False,
                p_value=rep.p_value,
                n_eff=m,
                details={"n": n_plus_1 - 1, "n_reps": m, "informational": True},
            )
        )
    return out


_REGISTRY = (
    ("cov_closed_form", _test_cov_closed_form),
    ("embedding_ks", _test_embedding_ks),
    ("cmj_clt_exp", _test_cmj_clt_exp),
    ("cmj_clt_gamma", _test_cmj_clt_gamma),
    ("functional_grid_exp", _test_functional_grid_exp),
    ("profile_small_n_tv", _test_profile_small_n_tv),
    ("level1_moments", _test_level1_moments),
    ("limit_sampler_cov", _test_limit_sampler_cov),
    ("renewal_exp", _test_renewal_exp),
    ("renewal_gamma", _test_renewal_gamma),
    ("second_moment_identity", _test_second_moment_identity),
    ("moment_ratio_exp", _test_moment_ratio_exp),
    ("moment_ratio_gamma", _test_moment_ratio_gamma),
    ("worker_determinism", _test_worker_determinism),
    ("tree_profile_direct", _test_tree_profile_direct),
)


def registry_names() -> tuple:
    return tuple(name for name, _ in _REGISTRY)


def verify_suite(cfg: VerifyConfig) -> dict:
    """Run the full registry and assemble the manifest.

    The per-test seed is mix64(master_seed, ordinal), so inserting new
    tests at the end never reshuffles existing results. The manifest's
    determinism_hash covers only seed-determined content (config core,
    results, summary); wall time and worker count live in the
    provenance block outside the hash.
    """
    started = time.monotonic()
    results = []
    for ordinal, (group, fn) in enumerate(_REGISTRY):
        test_seed = mix64(cfg.master_seed, ordinal)
        try:
            results.extend(fn(cfg, test_seed))
        except (BranchLabError, MemoryError) as exc:
            results.append(
                _entry(
                    f"{group}.skipped",
                    None,
                    None,
                    True,
                    skipped=True,
                    details={"error": f"{type(exc).__name__}: {exc}"},
                )
            )
    gating = [r for r in results if r["gating"]]
    summary = {
        "n_results": len(results),
        "n_gating": len(gating),
        "n_failed_gating": sum(1 for r in gating if not r["pass"]),
        "all_gating_pass": all(r["pass"] for r in gating),
    }
    core = {
        "master_seed": int(cfg.master_seed),
        "quick": bool(cfg.quick),
        "results": results,
        "summary": summary,
    }
    digest = hashlib.sha256(canonical_json_bytes(core)).hexdigest()
    return {
        "config": {
            "master_seed": int(cfg.master_seed),
            "workers": int(cfg.workers),
            "quick": bool(cfg.quick),
        },
        "provenance": {
            "package": "branchlab",
            "version": __version__,
            "wall_time_s": time.monotonic() - started,
            "created_utc": datetime.now(timezone.utc).isoformat(),
        },
        "results": results,
        "summary": summary,
        "determinism_hash": digest,
    }


def manifest_core_bytes(manifest: dict) -> bytes:
    """The canonical bytes that determinism_hash covers."""
    core = {
        "master_seed": manifest["config"]["master_seed"],
        "quick": manifest["config"]["quick"],
        "results": manifest["results"],
        "summary": manifest["summary"],
    }
    return canonical_json_bytes(core)
