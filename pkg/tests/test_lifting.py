import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mutloc.formulation import FullVariableLayout, build_cost, marginalize
from mutloc.geometry import random_rotation, vec
from mutloc.lifting import (
    LiftedLayout,
    VARIANTS,
    assemble_qcqp,
    build_constraints,
    is_permutation,
    layout,
    lift_ground_truth,
    variant_options,
)

from conftest import cached_simulation


def random_truth(rng, N):
    theta = np.eye(N)[rng.permutation(N)]
    return (theta, rng.uniform(0.3, 3.0, N), np.array([random_rotation(rng) for _ in range(N)]),
            rng.normal(size=(N, 3)))


@pytest.mark.parametrize("N,d", [(1, 82), (2, 245), (3, 490)])
def test_layout_dimension(N, d):
    assert layout(N).d == d


def test_layout_segments_partition():
    lay = LiftedLayout(3)
    covered = np.zeros(lay.d, dtype=int)
    for s in lay.segments().values():
        covered[s] += 1
    assert np.all(covered == 1)


def test_lift_identity_case():
    z = lift_ground_truth(np.ones((1, 1)), [1.0], [np.eye(3)], [np.zeros(3)])
    lay = LiftedLayout(1)
    r = z[lay.r_slice(0, 0)]
    assert np.array_equal(r[:9], vec(np.eye(3)))
    assert not r[9:].any()
    assert z[lay.y] == 1.0


def test_lift_swap_blocks():
    rng = np.random.default_rng(0)
    theta = np.array([[0.0, 1.0], [1.0, 0.0]])
    _, s, R, P = random_truth(rng, 2)
    z = lift_ground_truth(theta, s, R, P)
    lay = LiftedLayout(2)
    assert np.any(z[lay.r_slice(0, 1)]) and np.any(z[lay.r_slice(1, 0)])
    assert not np.any(z[lay.r_slice(0, 0)]) and not np.any(z[lay.r_slice(1, 1)])


def test_lift_rejects_non_permutation():
    with pytest.raises(ValueError):
        lift_ground_truth(np.ones((2, 2)), [1, 1], [np.eye(3)] * 2, np.zeros((2, 3)))
    assert not is_permutation(np.array([[1.0, 0.0], [1.0, 0.0]]))


def test_default_constraint_count_n1():
    cons = build_constraints(LiftedLayout(1))
    assert len(cons) == 68
    tags = [c.tag for c in cons]
    assert tags.count("orth_col") == 24
    assert tags.count("binary") == 1
    assert tags.count("sum_row") + tags.count("sum_col") == 2
    assert tags.count("link_mu") == 4
    assert tags.count("link_r") == 36
    assert tags.count("homogenization") == 1


def test_redundant_family_counts_n1():
    lay = LiftedLayout(1)
    base = len(build_constraints(lay))
    assert len(build_constraints(lay, row_redundant=True)) == base + 24
    assert len(build_constraints(lay, cross_redundant=True)) == base + 36
    cons = build_constraints(lay, **variant_options("d+r"))
    tags = [c.tag for c in cons]
    assert tags.count("coupling") == 6 * 2 * 9
    assert tags.count("selection") == 36


def test_constraint_storage_is_canonical():
    for c in build_constraints(LiftedLayout(2), **variant_options("extended")):
        assert all(i <= j for i, j in c.entries)
        Q = c.matrix(LiftedLayout(2).d)
        assert abs(Q - Q.T).max() == 0


def test_no_duplicate_equations():
    cons = build_constraints(LiftedLayout(2), **variant_options("extended"))
    keys = {(tuple(sorted(c.entries.items())), c.g) for c in cons}
    assert len(keys) == len(cons)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_ground_truth_feasible(N, seed):
    rng = np.random.default_rng(seed)
    z = lift_ground_truth(*random_truth(rng, N))
    lay = LiftedLayout(N)
    for name in VARIANTS:
        for c in build_constraints(lay, **variant_options(name)):
            assert abs(c.residual(z)) <= 1e-10 * max(1.0, np.abs(z).max() ** 2)


def test_corrupted_point_violates():
    rng = np.random.default_rng(2)
    z = lift_ground_truth(*random_truth(rng, 2))
    lay = LiftedLayout(2)
    cons = build_constraints(lay)
    for k in (0, 13, 40, 75):
        bad = z.copy()
        bad[k] += 0.1
        assert max(abs(c.residual(bad)) for c in cons) >= 1e-3


def test_feasible_point_factorizes():
    """With ``y = 1`` the link equations pin ``r`` and ``mu`` to products."""
    rng = np.random.default_rng(3)
    lay = LiftedLayout(2)
    z = lift_ground_truth(*random_truth(rng, 2))
    for X in range(2):
        for Y in range(2):
            th = z[lay.theta(X, Y)]
            assert np.allclose(z[lay.r_slice(X, Y)], th * z[lay.ell(Y):lay.ell(Y) + 36])
            assert np.allclose(z[lay.mu(X, Y, 0):lay.mu(X, Y, 0) + 4],
                               th * z[lay.h(Y, 0):lay.h(Y, 0) + 4])


def test_assemble_identity_embedding():
    lay = LiftedLayout(1)
    q = assemble_qcqp(np.eye(37), build_constraints(lay), lay)
    assert q.d == 82 and np.trace(q.Q0) == pytest.approx(37.0)


def test_assemble_psd_and_zero_at_truth():
    inst, gt = cached_simulation(2, 41, 0.0, 0)
    cm = marginalize(build_cost(inst), FullVariableLayout(2, inst.n))
    lay = LiftedLayout(2)
    q = assemble_qcqp(cm.C_bar, build_constraints(lay), lay)
    w = np.linalg.eigvalsh(q.Q0)
    assert w[0] >= -1e-9 * w[-1]
    z = lift_ground_truth(gt.theta, gt.scales, gt.rotations, gt.inner_biases)
    assert q.objective(z) <= 1e-9


def test_assemble_rejects_wrong_shape():
    lay = LiftedLayout(1)
    with pytest.raises(ValueError):
        assemble_qcqp(np.eye(5), [], lay)


def test_unknown_variant():
    with pytest.raises(ValueError):
        variant_options("nope")
