import warnings

import numpy as np
import pytest

from medic import InputError
from medic.metrics import (
    DegenerateTermWarning,
    PredictionLog,
    accuracy_matrix,
    average_task_accuracy,
    compute_metric_report,
    forgetting_F,
    intransigence_I,
    overall_accuracy,
    sd_averages,
    sd_f_term,
    sd_i_term,
    sd_normalized,
    sdf,
    sdi,
)
from medic.tasks import TaskConfiguration, build_schedule

from metric_oracle import brute_force, random_instance


def to_logs(steps):
    return {k: PredictionLog(k, list(d), [v[0] for v in d.values()], [v[1] for v in d.values()]) for k, d in steps.items()}


def schedule_of(groups):
    return build_schedule(TaskConfiguration(tuple(tuple(g) for g in groups), len(groups[0])))


def test_overall_accuracy():
    assert overall_accuracy(PredictionLog(1, [1, 2], [0, 1], [0, 1])) == 1.0
    assert overall_accuracy(PredictionLog(1, [1, 2], [0, 1], [1, 0])) == 0.0
    assert overall_accuracy(PredictionLog(1, range(5), [0, 0, 1, 1, 1], [0, 0, 1, 0, 0])) == 0.6
    with pytest.raises(InputError):
        overall_accuracy(PredictionLog(1, [], [], []))


def test_prediction_log_validation():
    with pytest.raises(InputError):
        PredictionLog(1, [1, 1], [0, 0], [0, 0])
    with pytest.raises(InputError):
        PredictionLog(1, [1, 2], [0, 0], [0, 5], class_universe=(0, 1))


def test_accuracy_matrix_single_step():
    sched = schedule_of([[0, 1]])
    log = PredictionLog(1, range(4), [0, 1, 0, 1], [0, 1, 1, 1])
    a = accuracy_matrix([log], sched)
    assert a.shape == (1, 1) and a[0, 0] == overall_accuracy(log)
    with pytest.raises(InputError):
        accuracy_matrix({}, sched)


def test_accuracy_matrix_recount():
    groups, inc, ref = random_instance(7, max_steps=2)
    a = accuracy_matrix(to_logs(inc), schedule_of(groups))
    for l in (1, 2):
        for j in range(1, l + 1):
            rows = [v for v in inc[l].values() if v[0] in groups[j - 1]]
            assert a[l - 1, j - 1] == sum(t == p for t, p in rows) / len(rows)
    assert np.isnan(a[0, 1])


def test_forgetting_examples():
    a = np.array([[0.9, np.nan], [0.8, 0.6]])
    assert forgetting_F(a, 2) == pytest.approx(0.1, abs=1e-15)
    assert forgetting_F(np.full((3, 3), 0.7), 3) == 0.0
    with pytest.raises(InputError):
        forgetting_F(a, 1)


def test_forgetting_matches_exhaustive_max():
    r = np.random.default_rng(1)
    a = np.tril(r.uniform(size=(3, 3)))
    expected = ((max(a[0, 0], a[1, 0]) - a[2, 0]) + (a[1, 1] - a[2, 1])) / 2
    assert forgetting_F(a, 3) == pytest.approx(expected, abs=1e-15)


def test_intransigence():
    a = np.array([[0.7]])
    assert intransigence_I(a, {1: 0.8}, 1) == pytest.approx(0.1, abs=1e-15)
    assert intransigence_I(a, {1: 0.7}, 1) == 0.0
    assert intransigence_I(a, {1: 0.67}, 1) < 0
    with pytest.raises(InputError):
        intransigence_I(a, {}, 1)


def _two_step(true, ref_pred, inc_pred):
    sched = schedule_of([[0, 1], [2, 3]])
    ids = list(range(len(true)))
    return sched, PredictionLog(2, ids, true, inc_pred), PredictionLog(2, ids, true, ref_pred)


def test_sd_f_term_enumeration():
    # five old-class samples; reference keeps four in the old group; the model sends one of those to new
    true = [0, 1, 0, 1, 0, 2, 3]
    ref = [0, 1, 1, 0, 2, 2, 3]
    inc = [0, 3, 0, 1, 2, 2, 3]
    sched, log_m, log_r = _two_step(true, ref, inc)
    assert sd_f_term(log_m, log_r, sched, 2) == 0.25
    assert sd_f_term(log_r, log_r, sched, 2) == 0.0
    all_new = [2, 2, 3, 3, 2, 2, 3]
    _, log_all, _ = _two_step(true, ref, all_new)
    assert sd_f_term(log_all, log_r, sched, 2) == 1.0


def test_sd_i_term_enumeration():
    true = [2, 3, 2, 3, 2, 0]
    ref = [2, 3, 3, 2, 0, 0]
    inc = [0, 3, 1, 2, 1, 0]
    sched, log_m, log_r = _two_step(true, ref, inc)
    # four denominator samples, two moved into the old group
    assert sd_i_term(log_m, log_r, sched, 2) == 0.5
    assert sd_i_term(log_r, log_r, sched, 2) == 0.0


def test_sd_terms_degenerate_denominator():
    sched, log_m, log_r = _two_step([2, 3, 0], [0, 1, 0], [2, 3, 0])
    with pytest.warns(DegenerateTermWarning):
        assert sd_i_term(log_m, log_r, sched, 2) == 0.0


def test_sd_terms_need_matching_samples():
    sched, log_m, _ = _two_step([0, 2], [0, 2], [0, 2])
    other = PredictionLog(2, [0, 5], [0, 2], [0, 2])
    with pytest.raises(InputError):
        sd_f_term(log_m, other, sched, 2)


def test_sdf_sdi_divisor():
    assert sdf([0.2, 0.1]) == pytest.approx(0.1, abs=1e-15)
    assert sdi([0.0] * 4) == 0.0
    assert sdf([1.0] * 9) == pytest.approx(0.9, abs=1e-15)
    assert sd_normalized([1.0] * 9) == 1.0
    with pytest.raises(InputError):
        sdf([])


def test_sd_averages():
    assert sd_averages([0.2, 0.4], [0.0, 0.0]) == pytest.approx((0.3, 0.0), abs=1e-15)
    assert sd_averages([0.25], [0.5]) == (0.25, 0.5)


def test_average_task_accuracy():
    assert average_task_accuracy(np.array([[0.7, np.nan], [0.7, 0.7]]), 2) == pytest.approx(0.7)
    assert average_task_accuracy(np.array([[1.0, np.nan], [1.0, 0.0]]), 2) == 0.5
    r = np.random.default_rng(0)
    a = np.tril(r.uniform(size=(4, 4)))
    assert average_task_accuracy(a, 4) == pytest.approx(a[3].mean(), abs=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_report_matches_brute_force(seed):
    groups, inc, ref = random_instance(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateTermWarning)
        rep = compute_metric_report(to_logs(inc), to_logs(ref), schedule_of(groups))
    bf = brute_force(groups, inc, ref)
    T = len(groups)
    assert abs(rep.accuracy - bf["accuracy"]) < 1e-12
    assert abs(rep.A - bf["A"][T]) < 1e-12
    assert abs(rep.F - bf["F"][T]) < 1e-12
    assert abs(rep.I - bf["I"][T]) < 1e-12
    assert abs(rep.SDF - bf["SDF"][T]) < 1e-12
    assert abs(rep.SDI - bf["SDI"][T]) < 1e-12
    assert abs(rep.SDF_avg - bf["SDF_avg"]) < 1e-12
    assert abs(rep.SDI_avg - bf["SDI_avg"]) < 1e-12


def test_sd_values_within_bounds():
    for seed in range(30):
        groups, inc, ref = random_instance(100 + seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateTermWarning)
            rep = compute_metric_report(to_logs(inc), to_logs(ref), schedule_of(groups))
        for k in range(2, len(groups) + 1):
            assert 0 <= rep.traces["SDF"][k - 1] <= (k - 1) / k
            assert 0 <= rep.traces["SDI"][k - 1] <= (k - 1) / k


def test_replication_leaves_sd_terms_unchanged():
    groups, inc, ref = random_instance(3, max_steps=3)
    sched = schedule_of(groups)
    c = 4

    def replicate(steps):
        return {k: {sid * c + r: v for sid, v in d.items() for r in range(c)} for k, d in steps.items()}

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateTermWarning)
        base = compute_metric_report(to_logs(inc), to_logs(ref), sched)
        big = compute_metric_report(to_logs(replicate(inc)), to_logs(replicate(ref)), sched)
    for name in ("SDF", "SDI", "F", "I", "A"):
        assert np.allclose(base.traces[name], big.traces[name], atol=1e-12, equal_nan=True)


def test_equal_drops_equal_F_but_different_f_terms():
    # group 1 = {0}, group 2 = {1}; ten class-0 samples plus ten class-1 samples
    sched = schedule_of([[0], [1]])
    ids = list(range(20))
    true = [0] * 10 + [1] * 10
    ref2 = PredictionLog(2, ids, true, true)

    def scenario(before, after):
        # same 0.1 drop on group 1, starting from different accuracies
        pred2 = [0] * after + [1] * (10 - after) + [1] * 10
        acc1 = np.array([[before, np.nan], [after / 10, 1.0]])
        return acc1, PredictionLog(2, ids, true, pred2)

    a_hi, m_hi = scenario(0.9, 8)
    a_lo, m_lo = scenario(0.5, 4)
    assert forgetting_F(a_hi, 2) == pytest.approx(forgetting_F(a_lo, 2), abs=1e-12)
    assert sd_f_term(m_hi, ref2, sched, 2) != sd_f_term(m_lo, ref2, sched, 2)
