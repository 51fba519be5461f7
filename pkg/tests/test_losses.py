import math

import numpy as np
import pytest

from autkc.losses import (
    ALL_FAMILIES,
    LossSpec,
    autkc_loss,
    baseline_loss,
    check_lipschitz_pair,
    lipschitz_pair,
    loss_value_grad_batch,
    make_loss_spec,
    parse_loss_spec,
    scalar_surrogate,
    softmax,
)
from autkc.ranking import worst_case_rank


def test_scalar_surrogate_examples():
    assert scalar_surrogate("square", 1.0) == (0.0, 0.0)
    assert scalar_surrogate("exp", 0.0) == (1.0, -1.0)
    v, d = scalar_surrogate("logit", 0.0)
    assert v == pytest.approx(math.log(2), abs=1e-12) and d == -0.5
    # hinge subgradient convention: 0 exactly at the kink
    assert scalar_surrogate("hinge", 1.0) == (0.0, 0.0)
    assert scalar_surrogate("hinge", 0.5) == (0.5, -1.0)


def test_softmax_examples():
    assert np.allclose(softmax([0.0, 0.0, 0.0]), 1 / 3)
    assert np.allclose(softmax([1.0, 0.0, 0.0]), [0.57612, 0.21194, 0.21194], atol=1e-5)
    out = softmax([7.0, 1007.0])
    assert np.all(np.isfinite(out)) and out[1] == pytest.approx(1.0)
    # shift invariance
    s = np.array([0.3, -1.2, 2.0])
    assert np.allclose(softmax(s), softmax(s + 123.0))
    assert softmax(s).sum() == pytest.approx(1.0)


def test_parse_loss_spec_grammar():
    assert parse_loss_spec("autkc-exp@5") == LossSpec("autkc-exp", 5, True)
    assert parse_loss_spec("l5@3") == LossSpec("l5", 3, False)
    assert parse_loss_spec("ce") == LossSpec("ce", None, False)
    assert parse_loss_spec("hinge") == LossSpec("mc-hinge", None, False)
    assert str(parse_loss_spec("AUTKC-SQ@2")) == "autkc-sq@2"
    for bad in ["nope", "ce@3", "l1", "autkc-exp", "l2@x", "autkc-exp@0"]:
        with pytest.raises(ValueError):
            parse_loss_spec(bad)


def test_normalize_mode_is_fixed_per_family():
    with pytest.raises(ValueError):
        LossSpec("autkc-exp", 3, normalize=False)
    with pytest.raises(ValueError):
        LossSpec("autkc-hinge", 3, normalize=True)


def test_autkc_loss_examples():
    equal = [7.0, 7.0, 7.0, 7.0]
    val, _ = autkc_loss(make_loss_spec("autkc-sq", 2), equal, 1)
    assert val == pytest.approx(1.5, abs=1e-12)
    val, _ = autkc_loss(make_loss_spec("autkc-exp", 2), equal, 0)
    assert val == pytest.approx(1.5, abs=1e-12)
    val, _ = autkc_loss(make_loss_spec("autkc-logit", 1), [1.0, 0.0, 0.0], 0)
    assert val == pytest.approx(1.2207, abs=1e-3)


def test_baseline_loss_examples():
    val, _ = baseline_loss(make_loss_spec("l5", 1), [3.0, 2.0, 1.0], 0)
    assert val == 0.0
    val, _ = baseline_loss(make_loss_spec("tce", 1), [0.0, 0.0], 0)
    assert val == pytest.approx(math.log(2), abs=1e-12)
    val, _ = baseline_loss(make_loss_spec("ce"), [50.0, 0.0, 0.0], 0)
    assert val == pytest.approx(0.0, abs=1e-12)


def test_table_formulas_by_hand():
    s = np.array([1.0, 3.0, 0.5, 2.0])
    y = 0
    rest_desc = np.sort(np.delete(s, y))[::-1]
    val, _ = baseline_loss(make_loss_spec("l1", 2), s, y)
    assert val == max(0.0, 1 + rest_desc[1] - s[y])
    shifted = s + 1.0
    shifted[y] -= 1.0
    top2 = np.sort(shifted)[::-1][:2]
    val, _ = baseline_loss(make_loss_spec("l2", 2), s, y)
    assert val == pytest.approx(max(0.0, top2.mean() - s[y]))
    val, _ = baseline_loss(make_loss_spec("l3", 2), s, y)
    assert val == pytest.approx(np.maximum(0.0, top2 - s[y]).mean())
    val, _ = baseline_loss(make_loss_spec("l4", 2), s, y)
    assert val == pytest.approx(max(0.0, 1 + rest_desc[:2].mean() - s[y]))
    val, _ = baseline_loss(make_loss_spec("mc-hinge"), s, y)
    assert val == max(0.0, 1 + rest_desc[0] - s[y])
    val, _ = baseline_loss(make_loss_spec("tce", 2), s, y)
    desc = np.sort(s)[::-1]
    assert val == pytest.approx(math.log(1 + np.exp(desc[:2] - s[y]).sum()))


def _families_with_cutoffs(C=5):
    specs = [make_loss_spec("ce"), make_loss_spec("mc-hinge")]
    for fam in ("l1", "l2", "l3", "l4", "l5", "tce"):
        specs.append(make_loss_spec(fam, 2))
    for fam in ("autkc-hinge", "autkc-sq", "autkc-exp", "autkc-logit"):
        specs.append(make_loss_spec(fam, 2))
    return specs


@pytest.mark.parametrize("spec", _families_with_cutoffs(), ids=str)
def test_losses_non_negative(spec):
    rng = np.random.default_rng(1)
    S = rng.standard_normal((200, 5)) * 2
    Y = rng.integers(0, 5, size=200)
    values, grads = loss_value_grad_batch(spec, S, Y)
    assert np.all(values >= 0) and np.all(np.isfinite(values)) and np.all(np.isfinite(grads))


@pytest.mark.parametrize("family,l0", [("autkc-sq", 1.0), ("autkc-exp", 1.0), ("autkc-logit", math.log(2))])
def test_autkc_floor_from_self_term(family, l0):
    rng = np.random.default_rng(2)
    K = 2
    spec = make_loss_spec(family, K)
    S = rng.standard_normal((300, 6)) * 3
    Y = rng.integers(0, 6, size=300)
    values, _ = loss_value_grad_batch(spec, S, Y)
    assert np.all(values >= l0 / K - 1e-12)


def test_autkc_permutation_equivariance():
    rng = np.random.default_rng(3)
    spec = make_loss_spec("autkc-logit", 2)
    s = rng.standard_normal(6)
    y = 4
    val, grad = autkc_loss(spec, s, y)
    perm = rng.permutation(6)
    val_p, grad_p = autkc_loss(spec, s[perm], int(np.where(perm == y)[0][0]))
    assert val_p == pytest.approx(val, rel=1e-12)
    assert np.allclose(grad_p, grad[perm], atol=1e-12)


def test_autkc_shift_invariance_when_normalized():
    spec = make_loss_spec("autkc-exp", 3)
    rng = np.random.default_rng(4)
    s = rng.standard_normal(6)
    v1, g1 = autkc_loss(spec, s, 2)
    v2, g2 = autkc_loss(spec, s + 57.0, 2)
    assert v2 == pytest.approx(v1, rel=1e-9)
    assert np.allclose(g1, g2, atol=1e-9)


def test_autkc_allows_cutoff_up_to_C():
    # K = C caps the selection at all C entries
    spec = make_loss_spec("autkc-sq", 4)
    val, grad = autkc_loss(spec, [0.0, 0.0, 0.0, 0.0], 0)
    assert val == pytest.approx(4 * 1.0 / 4)
    with pytest.raises(ValueError):
        autkc_loss(make_loss_spec("autkc-sq", 5), [0.0, 0.0, 0.0, 0.0], 0)


def test_l1_equals_l5_when_truth_above_cutoff():
    rng = np.random.default_rng(5)
    k = 2
    l1 = make_loss_spec("l1", k)
    l5 = make_loss_spec("l5", k)
    checked = 0
    while checked < 200:
        s = rng.standard_normal(6) * 2
        if np.diff(np.sort(s)).min() < 1e-6:
            continue
        y = int(rng.integers(0, 6))
        if worst_case_rank(s, y) > k:
            continue  # truth inside the top-k: the excluded k-th is s_[k+1]
        v1, _ = baseline_loss(l1, s, y)
        v5, _ = baseline_loss(l5, s, y)
        assert v1 == pytest.approx(v5, abs=1e-12)
        if s[y] >= 1 + np.sort(np.delete(s, y))[::-1][k - 1]:
            assert v1 == 0.0
        checked += 1


def test_cutoff_validation_against_C():
    with pytest.raises(ValueError):
        baseline_loss(make_loss_spec("l5", 3), [1.0, 2.0, 3.0], 0)  # needs s_[k+1]
    with pytest.raises(ValueError):
        baseline_loss(make_loss_spec("l1", 3), [1.0, 2.0, 3.0], 0)
    # l2/l3/tce allow k = C
    val, _ = baseline_loss(make_loss_spec("tce", 3), [1.0, 2.0, 3.0], 0)
    assert val > 0


def test_lipschitz_pair_constants():
    L1, L2 = lipschitz_pair("autkc-sq", 2)
    assert L1 == pytest.approx(2 * math.sqrt(6) / 2)
    assert L2 == pytest.approx(2 * math.sqrt(2) * 3 / 2)
    L1, L2 = lipschitz_pair("autkc-exp", 2)
    assert L1 == pytest.approx(math.e * math.sqrt(6) / 4)
    L1, L2 = lipschitz_pair("autkc-logit", 2)
    assert L1 == pytest.approx(math.sqrt(6) / (4 * math.e * math.log(2)))


def test_check_lipschitz_pair_square_passes():
    report = check_lipschitz_pair(make_loss_spec("autkc-sq", 2), C=5, trials=2000, seed=0)
    assert report["pass"] and 0 < report["max_ratio"] <= 1.0


def test_check_lipschitz_pair_identical_points_ratio_zero():
    report = check_lipschitz_pair(make_loss_spec("autkc-exp", 1), C=4, trials=1, seed=0)
    assert report["max_ratio"] >= 0.0  # rhs=0 cases map to ratio 0 by convention


def test_check_lipschitz_rejects_unsupported():
    with pytest.raises(ValueError):
        check_lipschitz_pair(make_loss_spec("autkc-hinge", 2), C=5, trials=10, seed=0)
    with pytest.raises(ValueError):
        check_lipschitz_pair(make_loss_spec("autkc-sq", 2), C=5, trials=0, seed=0)


def test_all_families_exported():
    assert set(ALL_FAMILIES) == {
        "ce", "mc-hinge", "l1", "l2", "l3", "l4", "l5", "tce",
        "autkc-hinge", "autkc-sq", "autkc-exp", "autkc-logit",
    }
