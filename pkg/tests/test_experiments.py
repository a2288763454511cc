import pytest

from mutloc.baselines import am_solve
from mutloc.experiments import (
    CSV_COLUMNS,
    benchmark,
    heatmap,
    heatmap_to_csv,
    read_records,
    records_to_csv,
    run_trial,
    score,
    summarize,
)
from mutloc.geometry import axis_angle

from conftest import cached_simulation


def test_score_perfect_is_zero(noise_free_n2):
    inst, gt = noise_free_n2
    sc = score(gt.state(), gt, inst)
    assert sc.rotation_error <= 1e-7 and sc.translation_error <= 1e-8
    assert sc.scale_error == 0.0 and sc.permutation_correct


def test_score_rotation_perturbation(noise_free_n1):
    inst, gt = noise_free_n1
    st = gt.state()
    st.rotations[0] = st.rotations[0] @ axis_angle([0.3, -1.0, 0.2], 0.1)
    assert score(st, gt, inst).rotation_error == pytest.approx(0.1, abs=1e-9)


def test_score_permutation_swap(noise_free_n2):
    inst, gt = noise_free_n2
    st = gt.state()
    st.theta = 1.0 - st.theta
    assert not score(st, gt, inst).permutation_correct


def test_score_requires_truth(noise_free_n1):
    inst, gt = noise_free_n1
    with pytest.raises(ValueError):
        score(gt.state(), None, inst)


def test_summarize():
    s = summarize([1.0, 2.0, 3.0])
    assert s["median"] == 2.0 and s["count"] == 3


def test_run_trial_all_methods():
    rows = run_trial(1, 21, 0.0, 0, methods=("SDP", "AM", "AM-GT", "LM", "LM-GT", "AM-C"),
                     variant="d")
    assert [r.method for r in rows] == ["SDP", "AM", "AM-GT", "LM", "LM-GT", "AM-C"]
    sdp = rows[0]
    assert sdp.certified
    for r in rows[1:]:
        assert r.cost >= sdp.f_dual - 1e-6
    assert rows[2].cost <= 1e-10 and rows[4].cost <= 1e-10


def test_run_trial_unknown_method():
    with pytest.raises(ValueError):
        run_trial(1, 11, 0.0, 0, methods=("XYZ",))


def test_benchmark_csv_is_reproducible():
    kw = dict(robots=[1], sigmas=[0.0, 0.2], trials=2, samples=15, methods=("SDP", "AM"), variant="d")
    a = records_to_csv(benchmark(**kw), omit_timing=True)
    b = records_to_csv(benchmark(**kw), omit_timing=True)
    assert a == b
    rows = read_records(a)
    assert len(rows) == 8 and tuple(rows[0]) == CSV_COLUMNS
    assert [r["sigma"] for r in rows[::2]] == ["0.0", "0.0", "0.2", "0.2"]


def test_certified_sdp_never_beaten_by_baselines():
    records = benchmark([1], [0.1], 3, 21, methods=("SDP", "AM", "LM", "AM-C"), variant="d")
    for k in range(0, len(records), 4):
        sdp, others = records[k], records[k + 1:k + 4]
        if sdp.certified:
            assert all(sdp.cost <= o.cost + 1e-6 for o in others)


def test_heatmap_grid():
    inst, gt = cached_simulation(1, 15, 0.0, 2)
    rows = heatmap(inst, gt, "lm", grid=3)
    assert len(rows) == 9
    center = rows[4]
    assert center[0] == 0.0 and center[1] == 0.0 and center[3] <= 1e-10
    text = heatmap_to_csv(rows)
    assert text.splitlines()[0] == "roll,pitch,method,final_cost,rotation_error,converged"


def test_score_local_result(noise_free_n1):
    inst, gt = noise_free_n1
    init = {"rotations": gt.rotations, "scales": gt.scales, "pbars": gt.inner_biases}
    res = am_solve(inst, gt.theta, init)
    sc = score(res, gt, inst)
    assert sc.rotation_error <= 1e-6 and sc.translation_error <= 1e-6
