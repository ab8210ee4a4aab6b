import pytest

from core.validation import Skip, ValidationSuite
from tests.conftest import make_model

CHECK_NAMES = [
    "classification",
    "product_identity",
    "intertwining",
    "associativity",
    "offspring_means",
    "renewal_identity",
    "generator_residual",
    "oracle",
    "oracle_link",
    "occupation_identity",
    "return_times",
]


@pytest.mark.unit
class TestCheckRunner:

    def test_exception_becomes_failed_outcome(self, mm1_model):
        suite = ValidationSuite(mm1_model, excursions=10)

        def broken():
            raise RuntimeError("boom")

        outcome = suite._run_check_safe("broken", broken)
        assert not outcome.passed
        assert not outcome.skipped
        assert outcome.detail == "boom"

    def test_skip_is_not_a_failure(self, mm1_model):
        suite = ValidationSuite(mm1_model, excursions=10)

        def skipping():
            raise Skip("nothing to do")

        outcome = suite._run_check_safe("skipping", skipping)
        assert outcome.passed
        assert outcome.skipped
        assert "nothing to do" in outcome.detail

    def test_check_order(self, mm1_model):
        assert [name for name, _ in ValidationSuite(mm1_model).checks()] == CHECK_NAMES


@pytest.mark.unit
class TestDeterministicChecks:

    @pytest.mark.parametrize("check", [
        "check_product_identity",
        "check_intertwining",
        "check_associativity",
        "check_offspring_means",
    ])
    def test_algebraic_checks_hold(self, periodic_model, check):
        passed, detail = getattr(ValidationSuite(periodic_model), check)()
        assert passed, detail

    def test_offspring_check_enumerates_small_models(self, r2_model):
        passed, detail = ValidationSuite(r2_model).check_offspring_means()
        assert passed, detail
        assert "2/2 parent types enumerated" in detail

    def test_offspring_check_scales_to_five_types(self):
        """Too many offspring vectors to enumerate; the closed form alone decides."""
        model = make_model(5, [[0, 1, 1, 1, 1, 1], [1, 0.2, 0.2, 0.2, 0.2, 0.2]])
        passed, detail = ValidationSuite(model).check_offspring_means()
        assert passed, detail
        assert "0/5 parent types enumerated" in detail

    def test_renewal_and_residual(self, r2_model):
        suite = ValidationSuite(r2_model)
        assert suite.check_renewal_identity()[0]
        assert suite.check_generator_residual()[0]

    def test_stationary_is_computed_once(self, r2_model):
        suite = ValidationSuite(r2_model)
        assert suite.stationary() is suite.stationary()

    def test_stationary_skipped_for_symmetric(self, symmetric_model):
        suite = ValidationSuite(symmetric_model, excursions=10)
        with pytest.raises(Skip):
            suite.stationary()


@pytest.mark.integration
class TestSuite:

    def test_r2_passes(self, r2_model):
        report = ValidationSuite(r2_model, excursions=2_000, seed=3).run()
        assert [c.name for c in report.checks] == CHECK_NAMES
        assert report.passed, [c.detail for c in report.checks if not c.passed]
        assert not any(c.skipped for c in report.checks)

    def test_symmetric_skips_stationary_checks(self, symmetric_model):
        report = ValidationSuite(symmetric_model, excursions=50).run()
        skipped = {c.name for c in report.checks if c.skipped}
        assert skipped == {"renewal_identity", "generator_residual", "oracle", "occupation_identity", "return_times"}
        assert report.passed

    def test_tight_oracle_tolerance_fails(self, r2_model):
        suite = ValidationSuite(r2_model, trunc=10, excursions=100, oracle_tolerance=1e-15)
        passed, detail = suite.check_oracle()
        assert not passed
        assert "N=10" in detail
