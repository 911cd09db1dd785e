import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posebench.errors import (
    AlignmentDegenerate,
    DegenerateFit,
    DegenerateInput,
    EmptyGroup,
    EmptyInput,
    EmptyMask,
)
from posebench.metrics import (
    DepthEvalInput,
    PairResult,
    SceneSummary,
    abs_rel,
    aggregate,
    align_affine,
    align_scale,
    delta1,
    maa,
    pearson_and_fit,
    rank_table,
)


def brute_force_maa(errors, threshold=10):
    errors = [e if np.isfinite(e) else np.inf for e in errors]
    fractions = []
    for th in range(1, threshold + 1):
        fractions.append(sum(e < th for e in errors) / len(errors))
    return sum(fractions) / threshold


class TestMaa:
    def test_all_zero(self):
        assert maa([0.0] * 7) == 1.0

    def test_all_huge(self):
        assert maa([1000.0] * 3) == 0.0

    def test_worked_example(self):
        assert maa([0.5, 5.5, 50.0]) == pytest.approx(0.5, abs=1e-15)

    def test_nonfinite_count_as_failures(self):
        assert maa([np.nan, np.inf, 0.1]) == pytest.approx(1 / 3, abs=1e-15)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            maa([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 200, allow_nan=False), min_size=1, max_size=40))
    def test_matches_brute_force(self, errors):
        assert maa(errors) == pytest.approx(brute_force_maa(errors), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=20),
        st.integers(0, 19),
        st.floats(0.1, 100),
    )
    def test_monotone_in_single_error(self, errors, idx, bump):
        idx = idx % len(errors)
        worse = list(errors)
        worse[idx] += bump
        assert maa(worse) <= maa(errors) + 1e-15

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 50, allow_nan=False), min_size=2, max_size=20), st.randoms())
    def test_permutation_invariant(self, errors, rnd):
        shuffled = list(errors)
        rnd.shuffle(shuffled)
        assert maa(shuffled) == maa(errors)


class TestDepthMetrics:
    def test_abs_rel_exact(self):
        inp = DepthEvalInput([1.0, 2.0], [1.0, 2.0])
        assert abs_rel(inp) == 0.0

    def test_abs_rel_single_entry(self):
        assert abs_rel(DepthEvalInput([1.0], [2.0])) == 0.5

    def test_abs_rel_matches_elementwise(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.integers(1, 30)
            zg = rng.uniform(0.5, 10, n)
            ze = rng.uniform(-2, 10, n)
            expected = np.mean([abs(g - e) / g for g, e in zip(zg, ze)])
            assert abs_rel(DepthEvalInput(ze, zg)) == pytest.approx(expected, rel=1e-12)

    def test_delta1_boundary_strict(self):
        assert delta1(DepthEvalInput([1.25], [1.0])) == 0.0
        assert delta1(DepthEvalInput([1.2], [1.0])) == 1.0
        assert delta1(DepthEvalInput([1.0, 2.0], [1.0, 2.0])) == 1.0

    def test_delta1_nonpositive_estimates_fail(self):
        assert delta1(DepthEvalInput([-1.0, 0.0], [1.0, 1.0])) == 0.0

    def test_empty_mask(self):
        inp = DepthEvalInput([1.0], [1.0], [False])
        with pytest.raises(EmptyMask):
            abs_rel(inp)
        with pytest.raises(EmptyMask):
            delta1(inp)


class TestAlignScale:
    def test_recovers_exact_scale(self):
        zg = np.array([1.0, 2.0, 3.0])
        out = align_scale(DepthEvalInput(2.0 * zg, zg))
        assert abs_rel(out) == pytest.approx(0.0, abs=1e-15)
        assert out.z_est[0] / 2.0 == pytest.approx(0.5, rel=1e-15)

    def test_identity_when_already_aligned(self):
        zg = np.array([1.0, 4.0])
        out = align_scale(DepthEvalInput(zg.copy(), zg))
        assert np.allclose(out.z_est, zg)

    def test_matches_normal_equation_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = rng.integers(2, 40)
            zg = rng.uniform(0.5, 10, n)
            ze = rng.uniform(0.1, 10, n)
            s_oracle = float(np.sum(ze * zg) / np.sum(ze * ze))
            out = align_scale(DepthEvalInput(ze, zg))
            assert np.allclose(out.z_est, s_oracle * ze, rtol=1e-12)

    def test_degenerate_scale(self):
        with pytest.raises(AlignmentDegenerate):
            align_scale(DepthEvalInput([-1.0, -2.0], [1.0, 2.0]))


class TestAlignAffine:
    def test_recovers_exact_affine(self):
        zg = np.array([2.0, 4.0, 7.0, 9.0])
        ze = 0.5 * zg + 3.0
        out = align_affine(DepthEvalInput(ze, zg))
        assert abs_rel(out) == pytest.approx(0.0, abs=1e-12)
        # implied correction is (a, b) = (2, -6)
        a = (out.z_est[1] - out.z_est[0]) / (ze[1] - ze[0])
        assert a == pytest.approx(2.0, rel=1e-10)

    def test_constant_estimate_degenerate(self):
        with pytest.raises(DegenerateFit):
            align_affine(DepthEvalInput([3.0, 3.0, 3.0], [1.0, 2.0, 3.0]))

    def test_matches_2x2_normal_equations(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(3, 40))
            zg = rng.uniform(0.5, 10, n)
            ze = rng.uniform(0.1, 10, n)
            A = np.stack([ze, np.ones(n)], axis=1)
            coef, *_ = np.linalg.lstsq(A, zg, rcond=None)
            out = align_affine(DepthEvalInput(ze, zg))
            assert np.allclose(out.z_est, coef[0] * ze + coef[1], rtol=1e-9, atol=1e-10)

    def test_nonpositive_outputs_masked(self):
        # LS line through (1,10), (10,1), (14,1) crosses zero before ze = 14
        ze = np.array([1.0, 10.0, 14.0])
        zg = np.array([10.0, 1.0, 1.0])
        out = align_affine(DepthEvalInput(ze, zg))
        assert out.mask.tolist() == [True, True, False]

    def test_abs_rel_zero_after_affine_on_exact_data(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            zg = rng.uniform(1, 10, 10)
            a, b = rng.uniform(0.2, 3), rng.uniform(-0.5, 2)
            out = align_affine(DepthEvalInput(a * zg + b, zg))
            if out.mask.all():
                assert abs_rel(out) < 1e-10


class TestDelta1ScaleInvariance:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
    def test_delta1_after_align_scale_is_one(self, c, seed):
        rng = np.random.default_rng(seed)
        zg = rng.uniform(0.5, 10, 12)
        out = align_scale(DepthEvalInput(c * zg, zg))
        assert delta1(out) == 1.0


class TestPearson:
    def test_exact_line(self):
        x = np.array([0.0, 1.0, 2.0, 5.0])
        r, slope, intercept = pearson_and_fit(x, 2 * x + 1)
        assert r == pytest.approx(1.0, abs=1e-12)
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert intercept == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelation(self):
        x = np.array([0.0, 1.0, 3.0])
        r, *_ = pearson_and_fit(x, -x)
        assert r == pytest.approx(-1.0, abs=1e-12)

    def test_matches_covariance_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(3, 50))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            r, slope, intercept = pearson_and_fit(x, y)
            cx, cy = x - x.mean(), y - y.mean()
            r_o = float(cx @ cy / np.sqrt((cx @ cx) * (cy @ cy)))
            slope_o = float(cx @ cy / (cx @ cx))
            assert r == pytest.approx(r_o, abs=1e-12)
            assert slope == pytest.approx(slope_o, abs=1e-12)
            assert intercept == pytest.approx(y.mean() - slope_o * x.mean(), abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateInput):
            pearson_and_fit([1.0], [2.0])
        with pytest.raises(DegenerateInput):
            pearson_and_fit([1.0, 1.0], [1.0, 2.0])


class TestAggregate:
    def test_single_scene_passthrough(self):
        out = aggregate([SceneSummary("a", {"m": 0.5})])
        assert out.group_means == {"a": {"m": 0.5}}
        assert out.overall == {"m": 0.5}

    def test_worked_group_example(self):
        scenes = [
            SceneSummary("s1", {"m": 0.8}),
            SceneSummary("s2", {"m": 0.6}),
            SceneSummary("s3", {"m": 1.0}),
        ]
        grouping = {"s1": "A", "s2": "A", "s3": "B"}
        out = aggregate(scenes, grouping)
        assert out.group_means["A"]["m"] == pytest.approx(0.7)
        assert out.group_means["B"]["m"] == pytest.approx(1.0)
        assert out.overall["m"] == pytest.approx(0.85)

    def test_differs_from_flat_mean_for_unequal_groups(self):
        scenes = [
            SceneSummary("s1", {"m": 0.0}),
            SceneSummary("s2", {"m": 0.0}),
            SceneSummary("s3", {"m": 0.9}),
        ]
        out = aggregate(scenes, {"s1": "A", "s2": "A", "s3": "B"})
        flat = np.mean([0.0, 0.0, 0.9])
        assert out.overall["m"] == pytest.approx(0.45)
        assert out.overall["m"] != pytest.approx(flat)

    def test_scene_order_invariant(self):
        scenes = [SceneSummary(f"s{i}", {"m": i / 10}) for i in range(5)]
        grouping = {f"s{i}": "g" + str(i % 2) for i in range(5)}
        a = aggregate(scenes, grouping)
        b = aggregate(list(reversed(scenes)), grouping)
        assert a.overall == b.overall

    def test_empty(self):
        with pytest.raises(EmptyGroup):
            aggregate([])


class TestRankTable:
    def test_single_method(self):
        out = rank_table({"m1": {"delta1": 0.9, "abs_rel": 0.1}})
        assert out == {"delta1": {"m1": 1}, "abs_rel": {"m1": 1}}

    def test_published_delta1_column(self):
        # three methods with delta1 90.59 / 89.78 / 89.71 rank 1 / 2 / 3
        out = rank_table({
            "MoGeV2-L": {"delta1": 90.59},
            "MoGeV1-L": {"delta1": 89.78},
            "Metric3DV2-G": {"delta1": 89.71},
        })
        assert out["delta1"] == {"MoGeV2-L": 1, "MoGeV1-L": 2, "Metric3DV2-G": 3}

    def test_lower_is_better_for_abs_rel(self):
        out = rank_table({"a": {"abs_rel": 0.2}, "b": {"abs_rel": 0.1}})
        assert out["abs_rel"] == {"a": 2, "b": 1}

    def test_ties_share_rank_next_skips(self):
        out = rank_table({"a": {"maa": 0.9}, "b": {"maa": 0.9}, "c": {"maa": 0.5}})
        assert out["maa"] == {"a": 1, "b": 1, "c": 3}


def test_pair_result_validates_max():
    PairResult("p", "H", 1.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        PairResult("p", "H", 1.0, 2.0, 1.5)


def test_depth_eval_input_validates_gt():
    with pytest.raises(ValueError):
        DepthEvalInput([1.0], [-1.0])
    DepthEvalInput([1.0], [-1.0], [False])  # masked out, fine
