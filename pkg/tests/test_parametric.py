import pytest

from rampopt.parametric import (
    PASSIVE_ONLY,
    PASSIVE_PLUS_ACTIVE,
    ParametricCase,
    generate_cases,
    run_study,
)
from rampopt.patterns import active_fraction, mean_height_ratio


class TestCaseGeneration:
    def test_exactly_120_cases(self):
        assert len(generate_cases()) == 120

    def test_fifteen_contiguous_bands(self):
        bands = {c.rows for c in generate_cases()}
        assert len(bands) == 15

    def test_case_expansion(self):
        case = ParametricCase(rows=(1,), level=4, mode=PASSIVE_ONLY)
        p = case.to_pattern()
        grid = p.height_grid()
        assert grid[1].tolist() == [4] * 6
        assert grid.sum() == 24
        assert sum(p.actives) == 0

    def test_active_case_arms_band_only(self):
        case = ParametricCase(rows=(0, 1), level=1, mode=PASSIVE_PLUS_ACTIVE)
        p = case.to_pattern()
        jets = p.active_grid()
        assert jets[0].tolist() == [1] * 6
        assert jets[1].tolist() == [1] * 6
        assert jets[2:].sum() == 0

    def test_all_expansions_distinct(self):
        seen = {c.to_pattern() for c in generate_cases()}
        assert len(seen) == 120

    def test_generation_is_deterministic(self):
        assert generate_cases() == generate_cases()

    def test_non_contiguous_band_rejected(self):
        with pytest.raises(ValueError):
            ParametricCase(rows=(0, 2), level=1, mode=PASSIVE_ONLY)

    def test_level_zero_rejected(self):
        with pytest.raises(ValueError):
            ParametricCase(rows=(0,), level=0, mode=PASSIVE_ONLY)

    def test_metric_identities(self):
        for case in generate_cases():
            p = case.to_pattern()
            assert mean_height_ratio(p) == pytest.approx(len(case.rows) * case.level / 20)
            if case.mode == PASSIVE_ONLY:
                assert active_fraction(p) == 0.0
            else:
                assert active_fraction(p) == pytest.approx(len(case.rows) / 5)


@pytest.fixture(scope="module")
def study(clean_plant):
    return run_study(clean_plant)


class TestStudy:

    def test_best_passive_case(self, study):
        assert study.best_passive.rows == (1, 2)
        assert study.best_passive.level == 4
        assert study.ja_star[study.best_passive_index] == pytest.approx(-0.43, abs=0.02)

    def test_best_active_case(self, study):
        assert study.best_active.rows == (0, 1)
        assert study.best_active.level == 1
        assert study.ja_star[study.best_active_index] == pytest.approx(-0.91, abs=0.02)

    def test_positive_fraction_near_half(self, study):
        assert 0.40 <= study.positive_fraction() <= 0.60

    def test_stored_metrics_recomputable_from_patterns(self, study):
        for i, p in enumerate(study.patterns):
            assert study.jb_star[i] == pytest.approx(mean_height_ratio(p))
            assert study.jc_star[i] == pytest.approx(active_fraction(p))

    def test_study_covers_both_modes(self, study):
        modes = {c.mode for c in study.cases}
        assert modes == {PASSIVE_ONLY, PASSIVE_PLUS_ACTIVE}

    def test_case_errors_are_annotated(self):
        class Broken:
            def fitness(self, position, pattern, seed):
                raise RuntimeError("tap clogged")

        from rampopt.optimizer import EvaluationError

        with pytest.raises(EvaluationError, match="case r1_l1p"):
            run_study(Broken())
