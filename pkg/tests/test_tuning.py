import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clad.cost import CostParams
from clad.data import SyntheticConfig, generate_synthetic
from clad.errors import TrainingError, ValidationError
from clad.tuning import (
    FoldPlan,
    SearchSpace,
    TrialResult,
    grid_search,
    make_folds,
    rank_trials,
    select_best,
)

from helpers import make_dataset, make_record


def _labeled_dataset(n, seed=0, positive_every=3):
    rng = np.random.default_rng(seed)
    return make_dataset(
        [
            make_record(
                record_id=f"r{i}",
                label=int(i % positive_every != 0),
                payments_on_time_rate=float(rng.uniform(0, 1)),
            )
            for i in range(n)
        ]
    )


class TestMakeFolds:
    def test_ten_folds_of_thousand(self):
        ds = generate_synthetic(SyntheticConfig(seed=1))
        plan = make_folds(ds, k=10, seed=0)
        sizes = sorted(len(f) for f in plan.fold_indices(ds))
        assert sizes == [1000] * 10

    def test_leave_one_out_boundary(self):
        ds = _labeled_dataset(10)
        plan = make_folds(ds, k=10, seed=0)
        assert sorted(len(f) for f in plan.fold_indices(ds)) == [1] * 10

    def test_eleven_records_ten_folds_pigeonhole(self):
        ds = _labeled_dataset(11)
        plan = make_folds(ds, k=10, seed=0)
        assert sorted(len(f) for f in plan.fold_indices(ds)) == [1] * 9 + [2]

    def test_k_larger_than_dataset_rejected(self):
        with pytest.raises(ValidationError):
            make_folds(_labeled_dataset(5), k=6, seed=0)

    def test_k_below_two_rejected(self):
        with pytest.raises(ValidationError):
            make_folds(_labeled_dataset(5), k=1, seed=0)

    def test_deterministic_per_seed(self):
        ds = _labeled_dataset(100)
        assert make_folds(ds, k=7, seed=3) == make_folds(ds, k=7, seed=3)
        assert make_folds(ds, k=7, seed=3) != make_folds(ds, k=7, seed=4)

    def test_stratified_needs_labels(self):
        ds = make_dataset([make_record(record_id=f"u{i}") for i in range(6)])
        with pytest.raises(ValidationError):
            make_folds(ds, k=2, seed=0)
        plan = make_folds(ds, k=2, seed=0, stratified=False)
        assert plan.k == 2

    @given(
        n=st.integers(min_value=4, max_value=400),
        k=st.integers(min_value=2, max_value=12),
        seed=st.integers(min_value=0, max_value=2**31),
        stratified=st.booleans(),
    )
    @settings(max_examples=100, deadline=None)
    def test_partition_laws(self, n, k, seed, stratified):
        if k > n:
            return
        ds = _labeled_dataset(n, seed=seed % 17)
        plan = make_folds(ds, k=k, seed=seed, stratified=stratified)
        folds = plan.fold_indices(ds)
        flat = np.concatenate(folds)
        # disjoint and exhaustive
        assert len(flat) == n
        assert len(np.unique(flat)) == n
        # balanced sizes
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        if stratified:
            y = ds.labels()
            per_fold_pos = [int(y[f].sum()) for f in folds]
            assert max(per_fold_pos) - min(per_fold_pos) <= 1

    @given(seed=st.integers(min_value=0, max_value=2**31), k=st.integers(min_value=2, max_value=10))
    @settings(max_examples=20, deadline=None)
    def test_stratified_ratio_tolerance_at_scale(self, seed, k):
        # the 2-point tolerance is meaningful once folds hold >=100 records
        ds = generate_synthetic(SyntheticConfig(n_records=2000, seed=seed % 50))
        plan = make_folds(ds, k=k, seed=seed)
        y = ds.labels()
        global_ratio = y.mean()
        for fold in plan.fold_indices(ds):
            assert abs(y[fold].mean() - global_ratio) <= 0.02


class TestSearchSpace:
    def test_size_is_cartesian_product(self):
        space = SearchSpace("gbdt", {"max_depth": (2, 3), "n_rounds": (1, 2, 3)})
        assert space.size == 6
        assert len(list(space.combinations())) == 6

    def test_combinations_deterministic_order(self):
        space = SearchSpace("gbdt", {"b": (1, 2), "a": (10,)})
        combos = list(space.combinations())
        assert combos == [{"a": 10, "b": 1}, {"a": 10, "b": 2}]

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            SearchSpace("gbdt", {})
        with pytest.raises(ValidationError):
            SearchSpace("gbdt", {"max_depth": ()})

    def test_unknown_family_rejected(self):
        with pytest.raises(ValidationError):
            SearchSpace("catboost", {"depth": (1,)})

    def test_nested_lists_become_tuples(self):
        space = SearchSpace("mlp", {"hidden_layers": [[4], [4, 4, 6, 8]]})
        combos = list(space.combinations())
        assert combos[0]["hidden_layers"] == (4,)
        assert combos[1]["hidden_layers"] == (4, 4, 6, 8)


COST = CostParams(alpha=0.2, mr=0.05, admin_cost=10.0)


class TestGridSearch:
    def test_singleton_space(self):
        ds = _labeled_dataset(60, seed=1)
        plan = make_folds(ds, k=3, seed=0)
        space = SearchSpace("gbdt", {"max_depth": (2,), "n_rounds": (2,), "learning_rate": (0.3,)})
        ranking = grid_search(ds, space, COST, plan)
        assert len(ranking) == 1
        trial = ranking[0]
        assert len(trial.fold_costs) == 3
        assert trial.mean_cost == pytest.approx(sum(trial.fold_costs) / 3)

    def test_duplicate_combinations_tie_break_lexicographic(self):
        ds = _labeled_dataset(40, seed=2)
        plan = make_folds(ds, k=2, seed=0)
        # two distinct-looking combos that train the same model family twice
        space = SearchSpace("gbdt", {"max_depth": (2, 2), "n_rounds": (1,)})
        ranking = grid_search(ds, space, COST, plan)
        assert len(ranking) == 2
        assert ranking[0].mean_cost == ranking[1].mean_cost
        assert ranking[0].params_key <= ranking[1].params_key

    def test_dominating_combination_ranks_first(self):
        ds = generate_synthetic(SyntheticConfig(n_records=400, seed=6))
        plan = make_folds(ds, k=3, seed=1)
        # a vanishing learning rate leaves the base score: a constant
        # grant-everything classifier under this admin-heavy profile,
        # paying every negative's exposure on every fold
        grant_biased = CostParams(alpha=1.0, mr=0.9, admin_cost=5000.0, fp_variant="incremental_exposure")
        space = SearchSpace("gbdt", {"max_depth": (3,), "n_rounds": (30,), "learning_rate": (0.3, 1e-9)})
        ranking = grid_search(ds, space, grant_biased, plan)
        assert ranking[0].params["learning_rate"] == 0.3
        strong, weak = ranking[0], ranking[1]
        assert all(s < w for s, w in zip(strong.fold_costs, weak.fold_costs))

    def test_failed_trial_kept_with_infinite_cost(self):
        ds = _labeled_dataset(30, seed=3)
        plan = make_folds(ds, k=2, seed=0)
        space = SearchSpace("gbdt", {"max_depth": (2,), "n_rounds": (1,), "bogus_param": (1,)})
        ranking = grid_search(ds, space, COST, plan)
        assert len(ranking) == 1
        assert ranking[0].failed
        assert math.isinf(ranking[0].mean_cost)

    def test_total_trials_equal_product_size(self):
        ds = _labeled_dataset(40, seed=4)
        plan = make_folds(ds, k=2, seed=0)
        space = SearchSpace("gbdt", {"max_depth": (2, 3), "n_rounds": (1, 2), "learning_rate": (0.3,)})
        ranking = grid_search(ds, space, COST, plan)
        assert len(ranking) == space.size == 4

    def test_no_leakage_between_train_and_eval_folds(self):
        ds = _labeled_dataset(50, seed=5)
        plan = make_folds(ds, k=5, seed=2)
        folds = plan.fold_indices(ds)
        ids = ds.ids()
        for held_out in folds:
            train_ids = {ids[i] for f in folds if f is not held_out for i in f}
            eval_ids = {ids[i] for i in held_out}
            assert train_ids & eval_ids == set()

    def test_rank_one_has_minimal_mean_cost(self):
        ds = _labeled_dataset(60, seed=7)
        plan = make_folds(ds, k=3, seed=0)
        space = SearchSpace("gbdt", {"max_depth": (2, 4), "n_rounds": (1, 4), "learning_rate": (0.3,)})
        ranking = grid_search(ds, space, COST, plan)
        assert all(ranking[0].mean_cost <= t.mean_cost for t in ranking)

    def test_parallel_results_match_serial(self):
        ds = _labeled_dataset(60, seed=8)
        plan = make_folds(ds, k=2, seed=0)
        space = SearchSpace("gbdt", {"max_depth": (2, 3), "n_rounds": (2,), "learning_rate": (0.3,)})
        serial = grid_search(ds, space, COST, plan, jobs=1)
        parallel = grid_search(ds, space, COST, plan, jobs=2)
        assert [t.params for t in serial] == [t.params for t in parallel]
        assert [t.fold_costs for t in serial] == [t.fold_costs for t in parallel]

    def test_mlp_family_trials(self):
        ds = _labeled_dataset(40, seed=9)
        plan = make_folds(ds, k=2, seed=0)
        space = SearchSpace("mlp", {"hidden_layers": [[2]], "epochs": (1, 2), "batch_size": (8,)})
        ranking = grid_search(ds, space, COST, plan)
        assert len(ranking) == 2
        assert not ranking[0].failed


class TestSelectBest:
    def test_min_cost_selected(self):
        a = TrialResult(params={"x": 1}, fold_costs=(5.0,), fold_accuracies=(0.9,))
        b = TrialResult(params={"x": 2}, fold_costs=(7.0,), fold_accuracies=(0.95,))
        assert select_best(rank_trials([b, a])) is a

    def test_all_failed_raises(self):
        failed = TrialResult(params={"x": 1}, error="boom")
        with pytest.raises(TrainingError, match="every trial failed"):
            select_best([failed])

    def test_empty_ranking_raises(self):
        with pytest.raises(ValidationError):
            select_best([])

    def test_accuracy_breaks_cost_ties(self):
        a = TrialResult(params={"x": 1}, fold_costs=(5.0,), fold_accuracies=(0.90,))
        b = TrialResult(params={"x": 2}, fold_costs=(5.0,), fold_accuracies=(0.99,))
        assert select_best(rank_trials([a, b])) is b
