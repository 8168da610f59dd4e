import numpy as np
import pytest

from clad.cost import CostParams, FpVariant, bayes_threshold, dataset_costs, decide, total_cost
from clad.data import SyntheticConfig, generate_synthetic
from clad.demo import demo_cases, demo_model
from clad.scoring import evaluate_model, majority_class_report, score_dataset


COST = CostParams(alpha=0.2, mr=0.05, admin_cost=10.0, fp_variant=FpVariant.FULL_LIMIT)


class TestScoreDataset:
    def test_per_case_threshold_and_decision(self):
        ds = demo_cases()
        scored = score_dataset(ds, demo_model(), COST)
        assert len(scored) == len(ds)
        for rec, case in zip(ds.records, scored):
            costs = dataset_costs(ds.subset([ds.ids().index(rec.record_id)]), COST)[0]
            assert case.threshold == bayes_threshold(costs)
            assert case.decision == decide(case.probability, case.threshold)

    def test_empty_dataset(self):
        from helpers import make_dataset

        assert score_dataset(make_dataset([]), demo_model(), COST) == []


class TestAggregationConsistency:
    def test_report_equals_instance_wise_computation(self):
        # accuracy and cost from the confusion listing must equal the
        # values recomputed instance by instance
        ds = generate_synthetic(SyntheticConfig(n_records=500, seed=9))
        report, scored = evaluate_model("m", ds, demo_model(), COST)
        y = ds.labels()
        decisions = np.array([c.decision for c in scored])
        assert report.accuracy == pytest.approx(float(np.mean(decisions == y)))
        instance_cost = total_cost(y, decisions, [c.costs for c in scored])
        assert report.total_cost == pytest.approx(instance_cost)
        m = report.matrix
        assert m.n == len(ds)
        assert m.tp + m.fn == int(y.sum())

    def test_fixed_threshold_path(self):
        ds = generate_synthetic(SyntheticConfig(n_records=300, seed=3))
        report_bayes, scored = evaluate_model("b", ds, demo_model(), COST)
        report_half, _ = evaluate_model("h", ds, demo_model(), COST, threshold=0.5)
        half_decisions = [int(c.probability > 0.5) for c in scored]
        assert report_half.matrix.tp == int(np.sum((ds.labels() == 1) & (np.array(half_decisions) == 1)))
        # severe false-positive costs push the per-case cutoffs above 0.5
        assert report_bayes.matrix.fp <= report_half.matrix.fp


class TestMajorityBaseline:
    def test_majority_grants_everything_here(self):
        ds = generate_synthetic(SyntheticConfig(n_records=400, seed=5))
        report = majority_class_report("maj", ds, COST)
        y = ds.labels()
        assert report.matrix.tp == int(y.sum())
        assert report.matrix.fn == 0
        costs = dataset_costs(ds, COST)
        expected = sum(ic.c_fp for ic, label in zip(costs, y) if label == 0)
        assert report.total_cost == pytest.approx(expected)
