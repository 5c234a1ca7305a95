"""
Acceptance suites: each check builds its own problems, runs them and returns a
CheckReport; `run_suite` collects the reports and renders the pass/fail table.
"""
import logging
import math
import time
from typing import Callable, Dict, List, Optional

import numpy as np

from spmalab.models.config import AdvantageMode, FaRunConfig, Method, TabularRunConfig
from spmalab.models.experiment import ExperimentConfig
from spmalab.models.features import FeatureMap, LinearPolicyParams, SurrogateProblem
from spmalab.models.mdp import Policy, TabularMdp
from spmalab.models.record import CheckReport, CheckRow
from spmalab.services.diagnostics_service import (
    beta_hat,
    check_bandit_linear,
    check_bandit_superlinear,
    check_contraction_bound,
    check_monotone_improvement,
    check_tabular_equivalence,
    neighbourhood_proxy,
)
from spmalab.services.environment_service import (
    bandit_as_mdp,
    cliff_world,
    frozen_lake,
    one_hot_features,
    random_bandit,
    random_mdp,
    two_state_chain,
)
from spmalab.services.experiment_service import auc, best_eta, group_by_setting, run_experiment
from spmalab.services.fa_service import policy_gradient, policy_return, run_spma_fa
from spmalab.services.mdp_service import occupancy, solve_optimal, value_difference
from spmalab.services.sampling_service import empirical_weights, sample_states
from spmalab.services.surrogate_service import mdpo_surrogate, spma_surrogate
from spmalab.services.tabular_service import iterations_to_threshold, run_tabular

logger = logging.getLogger(__name__)

SUITES = ("bandit", "tabular", "fa", "all")
ETA_GRID = (0.3, 0.5, 0.7, 0.9, 1.0)
CONVERGENCE_THRESHOLD = 1e-6
MAX_COUNT_ITERS = 200_000
NOISE_ORDER_SLACK = 1e-12
# SPMA iterations to 1e-6 at eta = 0.9 (1 - gamma); regressions beyond 10% fail
FROZEN_SPMA_ITERATIONS: Dict[str, int] = {"cliff_world": 549, "frozen_lake": 109255}
ORDERING_REL_SLACK = 0.05
BETA_HAT_LIMIT = 1e-3


def _random_feature_problem(rng: np.random.Generator, S: int = 4, A: int = 3, d: int = 5):
    features = FeatureMap(x=rng.normal(size=(S * A, d)), num_states=S, num_actions=A)
    weights = rng.dirichlet(np.ones(S))
    targets = rng.dirichlet(np.ones(A), size=S)
    return features, weights, targets


def _central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        grad[i] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return grad


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-8))


def check_bandit_rate() -> CheckReport:
    """100 random bandits, eta in {0.5, 1.0}, T = 200: the linear-rate bound at every t."""
    report = CheckReport(name="bandit_linear_rate", passed=True)
    rng = np.random.default_rng(1)
    violations, checked, worst = 0, 0, -math.inf
    for i in range(100):
        K = int(rng.integers(2, 11))
        gap = float(rng.choice([0.05, 0.2, 0.5]))
        if (K - 1) * gap > 1.0:
            gap = 0.05
        instance = random_bandit(K, gap, seed=1000 + i)
        mdp = bandit_as_mdp(instance)
        for eta in (0.5, 1.0):
            cfg = TabularRunConfig(method=Method.SPMA, step_size=eta, iterations=200)
            result = check_bandit_linear(run_tabular(mdp, cfg), K, instance.min_gap, eta)
            violations += len(result.failures)
            checked += len(result.rows)
            worst = max(worst, result.worst_margin)
    report.rows.append(CheckRow(f"violations in {checked} steps", violations, 0, violations == 0))
    report.passed = violations == 0
    report.notes.append(f"worst margin {worst:.3e}")
    return report


def check_bandit_closed_form() -> CheckReport:
    """Gap-dependent steps, K in {2, 4, 8}: closed form for t = 0..6 and the simplex to 1e-14."""
    report = CheckReport(name="bandit_superlinear", passed=True)
    for K in (2, 4, 8):
        rewards = np.linspace(0.1, 0.9, K)[::-1].copy()
        mdp = TabularMdp(
            transition=np.ones((1, K, 1)),
            reward=rewards[None, :],
            initial_dist=np.ones(1),
            discount=0.0,
            name=f"bandit_{K}",
        )
        cfg = TabularRunConfig(method=Method.SPMA_BANDIT_GAP, step_size=0.0, iterations=6)
        records = run_tabular(mdp, cfg)
        closed = check_bandit_superlinear(records, K, optimal_arm=0)
        report.rows += [CheckRow(f"K={K} {r.label}", r.measured, r.bound, r.ok) for r in closed.rows]
        drift = max(abs(float(np.sum(r.policy)) - 1.0) for r in records)
        report.rows.append(CheckRow(f"K={K} simplex", drift, 1e-14, drift <= 1e-14))
        report.notes += closed.notes
    report.passed = not report.failures
    return report


def _contraction_envs() -> List[TabularMdp]:
    return [cliff_world(0.9), frozen_lake(0.99, slippery=False)]


def check_contraction() -> CheckReport:
    """eta = 0.9 (1 - gamma), T = 500: per-step contraction and monotone improvement."""
    report = CheckReport(name="contraction_bound", passed=True)
    for mdp in _contraction_envs():
        eta = 0.9 * (1.0 - mdp.discount)
        records = run_tabular(mdp, TabularRunConfig(method=Method.SPMA, step_size=eta, iterations=500))
        contraction = check_contraction_bound(records, eta, mdp.discount)
        monotone = check_monotone_improvement(records)
        for sub in (contraction, monotone):
            margin = sub.worst_margin
            report.rows.append(CheckRow(f"{mdp.name} {sub.name} worst margin", margin, 0.0, sub.passed))
            report.notes += [f"{mdp.name}: {n}" for n in sub.notes]
    report.passed = not report.failures
    return report


def check_convergence_order() -> CheckReport:
    """
    Iterations to ||V* - V_t|| <= 1e-6: NPG within twice SPMA's count, SPG
    (best constant step of the scaled grid) strictly slower than both.
    """
    report = CheckReport(name="convergence_order", passed=True)
    for mdp in _contraction_envs():
        optimal = solve_optimal(mdp)
        eta = 0.9 * (1.0 - mdp.discount)

        def count(method: Method, step: float) -> Optional[int]:
            return iterations_to_threshold(mdp, method, step, CONVERGENCE_THRESHOLD, MAX_COUNT_ITERS, optimal)

        spma = count(Method.SPMA, eta)
        npg = count(Method.NPG, eta)
        spg_counts = [count(Method.SPG, g * (1.0 - mdp.discount)) for g in ETA_GRID]
        reached = [c for c in spg_counts if c is not None]
        spg = min(reached) if reached else None
        report.notes.append(f"{mdp.name}: SPMA {spma}, NPG {npg}, SPG {spg} (cap {MAX_COUNT_ITERS})")
        if spma is None:
            report.rows.append(CheckRow(f"{mdp.name} SPMA reaches 1e-6", MAX_COUNT_ITERS, MAX_COUNT_ITERS, False))
            continue
        report.rows.append(CheckRow(f"{mdp.name} NPG <= 2 x SPMA", npg if npg is not None else math.inf, 2 * spma, npg is not None and npg <= 2 * spma))
        spg_value = spg if spg is not None else math.inf
        slowest = max(spma, npg if npg is not None else spma)
        report.rows.append(CheckRow(f"{mdp.name} SPG slower than both", slowest, spg_value, spg_value > slowest))
        frozen = FROZEN_SPMA_ITERATIONS.get(mdp.name)
        if frozen is not None:
            report.rows.append(CheckRow(f"{mdp.name} SPMA within 10% of {frozen}", spma, 1.1 * frozen, abs(spma - frozen) <= 0.1 * frozen))
    report.passed = not report.failures
    return report


def equivalence_mdp() -> TabularMdp:
    """Full-support problem for the FA/tabular comparison: every state has positive occupancy."""
    return random_mdp(5, 3, 0.9, seed=7, uniform_initial=True)


def occupancy_support(mdp: TabularMdp) -> np.ndarray:
    """States with d^pi > 0; the same set for every full-support policy."""
    d = occupancy(mdp, Policy.uniform(mdp.num_states, mdp.num_actions)).d
    return np.flatnonzero(d > 0.0)


def check_fa_equivalence(outer_iters: int = 50, inner_iters: int = 200, tol: float = 1e-6) -> CheckReport:
    """
    One-hot features, exact occupancy weights: FA-SPMA tracks tabular SPMA in
    TV on a full-support random MDP and on CliffWorld's occupancy support.
    """
    report = CheckReport(name="fa_tabular_equivalence", passed=True)
    for mdp in (equivalence_mdp(), cliff_world(0.9)):
        optimal = solve_optimal(mdp)
        eta = 0.9 * (1.0 - mdp.discount)
        features = one_hot_features(mdp.num_states, mdp.num_actions)
        fa_cfg = FaRunConfig(outer_step_size=eta, inner_iters=inner_iters, outer_iters=outer_iters, estimate_surrogate_gap=False)
        fa = run_spma_fa(mdp, features, fa_cfg, optimal)
        tab = run_tabular(mdp, TabularRunConfig(method=Method.SPMA, step_size=eta, iterations=outer_iters), optimal)
        support = occupancy_support(mdp)
        per_step = check_tabular_equivalence(fa, tab, tol, states=support)
        worst = max(r.measured for r in per_step.rows)
        report.rows.append(CheckRow(f"{mdp.name} max TV over iterations", worst, tol, worst <= tol))
        if support.size < mdp.num_states:
            report.notes.append(f"{mdp.name}: {mdp.num_states - support.size} states off the occupancy support skipped")
    report.passed = not report.failures
    return report


def check_neighbourhood(outer_iters: int = 20, inner_iters: int = 200, gap_iters: int = 500) -> CheckReport:
    """
    One-hot features leave no parameterization bias, so with a long inner loop
    the neighbourhood radius beta_hat built from the measured surrogate gap is
    essentially zero. The band rows themselves are descriptive.
    """
    mdp = equivalence_mdp()
    rho_min = float(mdp.initial_dist.min())
    eta = 0.9 * (1.0 - mdp.discount)
    cfg = FaRunConfig(
        outer_step_size=eta,
        inner_iters=inner_iters,
        outer_iters=outer_iters,
        estimate_surrogate_gap=True,
        gap_iters=gap_iters,
        gap_restarts=2,
    )
    records = run_spma_fa(mdp, one_hot_features(mdp.num_states, mdp.num_actions), cfg)
    band = neighbourhood_proxy(records, mdp.discount, rho_min)
    gap = max(r.surrogate_gap for r in records if r.surrogate_gap is not None)
    beta = beta_hat(mdp.discount, rho_min, gap)
    report = CheckReport(name="neighbourhood_radius", passed=beta <= BETA_HAT_LIMIT)
    report.rows.append(CheckRow("beta_hat (one-hot)", beta, BETA_HAT_LIMIT, beta <= BETA_HAT_LIMIT))
    inside = sum(r.ok for r in band.rows)
    report.notes.append(f"final subopt_rho {records[-1].subopt_rho:.3e}; inside the band at {inside} of {len(band.rows)} tail iterations")
    return report


def check_gradients() -> CheckReport:
    report = CheckReport(name="gradient_oracles", passed=True)
    rng = np.random.default_rng(2)
    worst_spma, worst_mdpo = 0.0, 0.0
    for _ in range(5):
        features, weights, targets = _random_feature_problem(rng)
        prob = SurrogateProblem(state_weights=weights, targets=targets, features=features)
        pi = Policy(rng.dirichlet(np.ones(features.num_actions), size=features.num_states))
        raw = rng.normal(size=pi.probs.shape)
        adv = raw - (pi.probs * raw).sum(axis=1, keepdims=True)
        for _ in range(20):
            theta = rng.normal(size=features.dim)
            g = spma_surrogate(LinearPolicyParams(theta), prob)[1]
            fd = _central_difference(lambda th: spma_surrogate(LinearPolicyParams(th), prob)[0], theta)
            worst_spma = max(worst_spma, _relative_error(g, fd))
            g = mdpo_surrogate(LinearPolicyParams(theta), pi, adv, 0.5, weights, features)[1]
            fd = _central_difference(lambda th: mdpo_surrogate(LinearPolicyParams(th), pi, adv, 0.5, weights, features)[0], theta)
            worst_mdpo = max(worst_mdpo, _relative_error(g, fd))
    report.rows.append(CheckRow("spma_surrogate rel. error", worst_spma, 1e-5, worst_spma <= 1e-5))
    report.rows.append(CheckRow("mdpo_surrogate rel. error", worst_mdpo, 1e-5, worst_mdpo <= 1e-5))

    worst_pg = 0.0
    for seed in range(5):
        mdp = random_mdp(4, 3, 0.9, seed=100 + seed)
        features = FeatureMap(x=rng.normal(size=(12, 5)), num_states=4, num_actions=3)
        for _ in range(4):
            theta = rng.normal(size=features.dim)
            g = policy_gradient(mdp, features, LinearPolicyParams(theta))[1]
            fd = _central_difference(lambda th: policy_return(mdp, features, th), theta)
            worst_pg = max(worst_pg, _relative_error(g, fd))
    report.rows.append(CheckRow("exact grad J rel. error", worst_pg, 1e-4, worst_pg <= 1e-4))
    report.passed = not report.failures
    return report


def check_convexity(trials: int = 1000) -> CheckReport:
    rng = np.random.default_rng(3)
    features, weights, targets = _random_feature_problem(rng)
    prob = SurrogateProblem(state_weights=weights, targets=targets, features=features)

    def f(theta: np.ndarray) -> float:
        return spma_surrogate(LinearPolicyParams(theta), prob)[0]

    worst = -math.inf
    for _ in range(trials):
        a, b = rng.normal(scale=3.0, size=(2, features.dim))
        lam = rng.uniform()
        worst = max(worst, f(lam * a + (1 - lam) * b) - (lam * f(a) + (1 - lam) * f(b)))
    return CheckReport(name="surrogate_convexity", passed=worst <= 1e-10, rows=[CheckRow(f"{trials} chords", worst, 1e-10, worst <= 1e-10)])


def check_sampler(n: int = 1_000_000, sigmas: float = 3.0) -> CheckReport:
    report = CheckReport(name="occupancy_sampler", passed=True)
    for mdp in (two_state_chain(0.5), frozen_lake(0.99, slippery=False)):
        policy = Policy.uniform(mdp.num_states, mdp.num_actions)
        d = occupancy(mdp, policy).d
        freq = empirical_weights(sample_states(mdp, policy, n, seed=4), mdp.num_states)
        allowed = sigmas * np.sqrt(d * (1.0 - d) / n)
        excess = float(np.max(np.abs(freq - d) - allowed))
        report.rows.append(CheckRow(f"{mdp.name} max excess over {sigmas:g} sigma", excess, 0.0, excess <= 0.0))
    report.passed = not report.failures
    return report


def check_fa_ordering(seeds: int = 1, outer_T: int = 100) -> CheckReport:
    """
    Tile-coded CliffWorld, m = 25, exact occupancy weights, best-AUC eta per
    method: AUC(SPMA) >= AUC(MDPO) - max(se, 5%), both > AUC(SPG) + 2 se, and
    neither surrogate method may leave AUC at its frozen-pi_0 value.
    """
    cfg = ExperimentConfig.parse_obj(
        {
            "environment": {"kind": "cliff_world", "gamma": 0.9},
            "parameterization": {"kind": "linear", "features": "tile_coding", "tile_coding": {"num_tilings": 2, "tile_size": 2}},
            "methods": ["SPMA", "MDPO", "SPG"],
            "eta_grid": list(ETA_GRID),
            "inner_m": [25],
            "outer_T": outer_T,
            "seeds": list(range(seeds)),
            "state_mode": {"kind": "exact_occupancy"},
        }
    )
    results = run_experiment(cfg)
    report = CheckReport(name="fa_qualitative_ordering", passed=True)
    if results.failed:
        report.passed = False
        report.notes += [f"{c.key}: {c.error}" for c in results.failed]
        return report
    groups = group_by_setting(results)
    stats, frozen = {}, {}
    for (method, m), (eta, _) in best_eta(results).items():
        cells = groups[(method, m, eta)]
        aucs = np.array([auc(c.records) for c in cells])
        se = float(aucs.std(ddof=1) / math.sqrt(aucs.size)) if aucs.size > 1 else 0.0
        stats[method] = (float(aucs.mean()), se)
        frozen[method] = outer_T * cells[0].records[0].j_value
        report.notes.append(f"{method}: eta={eta:g}, AUC {aucs.mean():.4f} +/- {se:.4f}")
    spma, mdpo, spg = stats["SPMA"], stats["MDPO"], stats["SPG"]
    for name in ("SPMA", "MDPO"):
        report.rows.append(CheckRow(f"AUC({name}) over 2 x frozen pi_0", stats[name][0], 2.0 * frozen[name], stats[name][0] > 2.0 * frozen[name]))
    slack = max(mdpo[1], ORDERING_REL_SLACK * abs(mdpo[0]))
    report.rows.append(CheckRow("AUC(MDPO) - slack - AUC(SPMA)", mdpo[0] - slack - spma[0], 0.0, spma[0] >= mdpo[0] - slack))
    for name, (mean, se) in (("SPMA", spma), ("MDPO", mdpo)):
        margin = spg[0] + 2 * max(se, spg[1]) - mean
        report.rows.append(CheckRow(f"AUC(SPG) + 2 se - AUC({name})", margin, 0.0, margin < 0.0))
    report.passed = not report.failures
    return report


def check_noise_robustness(seeds: int = 5, outer_T: int = 50, inner_iters: int = 50) -> CheckReport:
    """
    The noise-free run must improve on pi_0 (J_T > 2 J_0); then final
    sub-optimality is nondecreasing in eps_approx and eps = 0 reproduces the
    exact run.
    """
    mdp = cliff_world(0.9)
    optimal = solve_optimal(mdp)
    gamma = mdp.discount
    eta = 0.9 * (1.0 - gamma)
    features = one_hot_features(mdp.num_states, mdp.num_actions)
    report = CheckReport(name="inexact_advantage_robustness", passed=True)

    def final_subopt(eps: float, seed: int):
        cfg = FaRunConfig(
            outer_step_size=eta,
            inner_iters=inner_iters,
            outer_iters=outer_T,
            advantage_mode=AdvantageMode(kind="noisy", epsilon_approx=eps, seed=seed),
            estimate_surrogate_gap=False,
        )
        return run_spma_fa(mdp, features, cfg, optimal)

    means = []
    for level in (0.0, 0.05, 0.1):
        eps = level / (1.0 - gamma)
        runs = [final_subopt(eps, seed) for seed in range(seeds)]
        means.append(float(np.mean([r[-1].subopt_rho for r in runs])))
        if level == 0.0:
            exact = run_spma_fa(
                mdp, features, FaRunConfig(outer_step_size=eta, inner_iters=inner_iters, outer_iters=outer_T, estimate_surrogate_gap=False), optimal
            )
            drift = max(abs(a.j_value - b.j_value) for a, b in zip(runs[0], exact))
            report.rows.append(CheckRow("eps=0 vs exact |J| drift", drift, 1e-12, drift <= 1e-12))
            j0, jT = exact[0].j_value, exact[-1].j_value
            report.rows.append(CheckRow("eps=0 J_T over 2 J_0", jT, 2.0 * j0, jT > 2.0 * j0))
    report.notes.append("mean final subopt_rho: " + ", ".join(f"{m:.4e}" for m in means))
    for lo, hi in zip(means, means[1:]):
        report.rows.append(CheckRow("subopt drop as noise grows", lo - hi, NOISE_ORDER_SLACK, lo <= hi + NOISE_ORDER_SLACK))
    report.passed = not report.failures
    return report


def check_value_difference(trials: int = 50) -> CheckReport:
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(trials):
        mdp = random_mdp(5, 3, float(rng.uniform(0.5, 0.95)), seed=200 + i)
        pi = Policy(rng.dirichlet(np.ones(3), size=5))
        pi_new = Policy(rng.dirichlet(np.ones(3), size=5))
        lhs, rhs = value_difference(mdp, pi, pi_new)
        worst = max(worst, abs(lhs - rhs))
    return CheckReport(name="value_difference", passed=worst <= 1e-8, rows=[CheckRow(f"{trials} MDPs", worst, 1e-8, worst <= 1e-8)])


SUITE_CHECKS: Dict[str, List[Callable[[], CheckReport]]] = {
    "bandit": [check_bandit_rate, check_bandit_closed_form],
    "tabular": [check_contraction, check_convergence_order, check_value_difference],
    "fa": [
        check_fa_equivalence,
        check_neighbourhood,
        check_gradients,
        check_convexity,
        check_sampler,
        check_fa_ordering,
        check_noise_robustness,
    ],
}


def run_suite(suite: str) -> List[CheckReport]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    names = ["bandit", "tabular", "fa"] if suite == "all" else [suite]
    reports = []
    for name in names:
        for check in SUITE_CHECKS[name]:
            started = time.perf_counter()
            report = check()
            logger.info(
                "%s %s in %.1fs",
                "✅" if report.passed else "❌",
                report.name,
                time.perf_counter() - started,
            )
            reports.append(report)
    return reports


def render_table(reports: List[CheckReport]) -> str:
    """Fixed-width check | row | measured | bound | verdict table."""
    header = ("check", "row", "measured", "bound", "verdict")
    body = []
    for report in reports:
        for row in report.rows or [CheckRow("-", math.nan, math.nan, report.passed)]:
            verdict = "info" if report.descriptive else ("PASS" if row.ok else "FAIL")
            body.append((report.name, row.label, f"{row.measured:.4e}", f"{row.bound:.4e}", verdict))
        for note in report.notes:
            body.append((report.name, f"note: {note}", "", "", ""))
    widths = [max(len(str(line[i])) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(str(cell).ljust(w) for cell, w in zip(line, widths)).rstrip() for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def verify(suite: str) -> int:
    """Exit status: 0 when every non-descriptive check passes, 1 otherwise."""
    reports = run_suite(suite)
    print(render_table(reports))
    failed = [r.name for r in reports if not r.descriptive and not r.passed]
    if failed:
        logger.error("❌ failed checks: %s", ", ".join(failed))
        return 1
    logger.info("✅ all %d checks passed", len(reports))
    return 0
