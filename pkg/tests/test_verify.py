import pytest

from spmalab.models.config import Method
from spmalab.models.record import CheckReport, CheckRow
from spmalab.services import verify_service
from spmalab.services.environment_service import two_state_chain
from spmalab.services.verify_service import (
    check_convexity,
    check_convergence_order,
    check_fa_equivalence,
    check_fa_ordering,
    check_neighbourhood,
    check_noise_robustness,
    check_value_difference,
    render_table,
    run_suite,
)


def row(report, label):
    return next(r for r in report.rows if r.label == label)


class TestVerify:
    def test_bandit_suite_passes(self):
        reports = run_suite("bandit")
        assert [r.name for r in reports] == ["bandit_linear_rate", "bandit_superlinear"]
        assert all(r.passed for r in reports), render_table(reports)

    def test_value_difference_check(self):
        assert check_value_difference(trials=10).passed

    def test_convexity_check(self):
        assert check_convexity(trials=200).passed

    def test_table(self):
        report = CheckReport(name="demo", passed=False, rows=[CheckRow("t=1", 2.0, 1.0, False)], notes=["hello"])
        table = render_table([report])
        assert "FAIL" in table
        assert "note: hello" in table
        assert table.splitlines()[0].startswith("check")


class TestFrozenCounts:
    @pytest.fixture
    def fake_counts(self, monkeypatch):
        counts = {Method.SPMA: 100, Method.NPG: 150, Method.SPG: None}

        def fake(mdp, method, step, threshold, max_iters, optimal=None):
            return counts[method]

        monkeypatch.setattr(verify_service, "iterations_to_threshold", fake)
        monkeypatch.setattr(verify_service, "_contraction_envs", lambda: [two_state_chain(0.5)])

    def test_count_within_tolerance(self, fake_counts, monkeypatch):
        monkeypatch.setattr(verify_service, "FROZEN_SPMA_ITERATIONS", {"two_state_chain": 105})
        report = check_convergence_order()
        assert report.passed, render_table([report])
        assert row(report, "two_state_chain SPMA within 10% of 105").ok

    def test_count_regression_fails(self, fake_counts, monkeypatch):
        monkeypatch.setattr(verify_service, "FROZEN_SPMA_ITERATIONS", {"two_state_chain": 50})
        report = check_convergence_order()
        assert not report.passed
        assert [r.label for r in report.failures] == ["two_state_chain SPMA within 10% of 50"]

    def test_shipped_counts(self):
        assert verify_service.FROZEN_SPMA_ITERATIONS == {"cliff_world": 549, "frozen_lake": 109255}


class TestFaChecks:
    def test_equivalence_covers_cliff_world(self):
        report = check_fa_equivalence(outer_iters=3, inner_iters=300, tol=1e-3)
        assert report.passed, render_table([report])
        assert [r.label for r in report.rows] == ["random_7 max TV over iterations", "cliff_world max TV over iterations"]
        assert "10 states off the occupancy support" in report.notes[0]

    def test_neighbourhood_radius_is_small_for_one_hot(self):
        report = check_neighbourhood()
        assert report.passed, render_table([report])
        assert row(report, "beta_hat (one-hot)").measured <= 1e-3

    def test_noise_free_run_leaves_pi_0(self):
        report = check_noise_robustness(seeds=1, outer_T=20, inner_iters=50)
        assert row(report, "eps=0 J_T over 2 J_0").ok, render_table([report])
        assert row(report, "eps=0 vs exact |J| drift").ok

    def test_surrogate_methods_leave_frozen_auc(self):
        report = check_fa_ordering(seeds=1, outer_T=30)
        assert row(report, "AUC(SPMA) over 2 x frozen pi_0").ok, render_table([report])
        assert row(report, "AUC(MDPO) over 2 x frozen pi_0").ok, render_table([report])
