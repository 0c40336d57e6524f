import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egfc.granule import SIGMA_MAX, SIGMA_MIN, Granule, InvalidInputError, create_granule
from egfc.rules import (
    HyperParams,
    RuleBase,
    granule_distance,
    merge_pair,
    merged_parameters,
    pairwise_distances,
)


def granule(mu, sigma, label=None, count=1, inactivity=0, uid=-1):
    return Granule(np.array(mu, float), np.array(sigma, float), label, count, inactivity, uid)


def base_with(*granules, n=None, **params):
    rb = RuleBase(n or granules[0].n, HyperParams(**params))
    for k, g in enumerate(granules):
        g.uid = k
        rb.granules.append(g)
    rb._next_uid = len(granules)
    return rb


def point_with_activation(center, level, sigma=SIGMA_MAX):
    """Offset from ``center`` (along dim 0) at which a fresh granule's activation equals ``level``."""
    return center + sigma * math.sqrt(-2 * math.log(level))


class TestHyperParams:
    def test_defaults(self):
        p = HyperParams()
        assert (p.rho0, p.delta, p.h_r, p.rho_min, p.rho_max) == (0.1, 0.1, 200, 0.01, 1.0)

    @pytest.mark.parametrize("kw", [{"rho0": 0}, {"delta": -1}, {"rho_min": 0.5, "rho_max": 0.4}, {"h_r": 0}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            HyperParams(**kw)

    def test_infinite_horizon(self):
        assert HyperParams(h_r=None).h_r == math.inf
        assert HyperParams(h_r="inf").h_r == math.inf


class TestClassify:
    def test_single_rule_at_center(self):
        rb = base_with(create_granule([0.3, 0.6], 3))
        est = rb.classify([0.3, 0.6])
        assert est.label == 3 and est.activation == 1.0 and est.winning_rule == 0

    def test_argmax(self):
        g1, g2 = create_granule([0.0], 1), create_granule([1.0], 2)
        rb = base_with(g1, g2)
        x = point_with_activation(0.0, 0.8)
        assert rb.activations([x])[0] == pytest.approx(0.8)
        assert rb.classify([x]).label == 1

    def test_unlabeled_only(self):
        rb = base_with(create_granule([0.5]))
        est = rb.classify([0.5])
        assert est.label is None and est.winning_rule is None

    def test_empty(self):
        est = RuleBase(3).classify([0.1, 0.2, 0.3])
        assert est.label is None and est.activation == 0.0

    def test_tie_prefers_more_updated_then_lower_index(self):
        a = granule([0.5], [0.1], 1, count=3)
        b = granule([0.5], [0.1], 2, count=7)
        c = granule([0.5], [0.1], 3, count=7)
        assert base_with(a, b, c).classify([0.5]).label == 2


class TestSelect:
    def _two(self, la=None, lb=None):
        # both at the same center with different widths, so at x they give 0.9 and 0.6
        x = 0.3
        s1 = x / math.sqrt(-2 * math.log(0.9))
        s2 = x / math.sqrt(-2 * math.log(0.6))
        rb = base_with(granule([0.0], [s1], la), granule([0.0], [s2], lb))
        rb.rho = 0.5
        np.testing.assert_allclose(rb.activations([x]), [0.9, 0.6])
        return rb, [x]

    def test_unlabeled_sample_takes_most_active(self):
        rb, x = self._two(1, 2)
        assert rb.select_adaptation_rule(x) == 0

    def test_labeled_sample_falls_back_to_matching_rule(self):
        rb, x = self._two(1, 2)
        assert rb.select_adaptation_rule(x, 2) == 1

    def test_unlabeled_rule_is_compatible(self):
        rb, x = self._two(1, None)
        assert rb.select_adaptation_rule(x, 2) == 1

    def test_none_above_threshold(self):
        rb, x = self._two(1, 2)
        rb.rho = 0.95
        assert rb.select_adaptation_rule(x) is None

    def test_equality_does_not_qualify(self):
        rb, x = self._two(1, 2)
        rb.rho = float(rb.activations(x)[0])
        assert rb.select_adaptation_rule(x) is None


class TestLearnStep:
    def test_first_sample_creates(self):
        rb = RuleBase(2)
        tr = rb.learn_step([0.2, 0.8], 4)
        assert rb.c == 1 and rb.granules[0].label == 4 and tr.created == 0
        assert tr.events == ["create"]

    def test_contradicting_label_creates_new_rule(self):
        rb = RuleBase(2)
        rb.learn_step([0.5, 0.5], 1)
        before = rb.granules[0].mu.copy(), rb.granules[0].update_count
        tr = rb.learn_step([0.52, 0.5], 2)
        assert tr.created is not None and rb.c == 2
        np.testing.assert_array_equal(rb.granules[0].mu, before[0])
        assert rb.granules[0].update_count == before[1]
        assert [g.label for g in rb.granules] == [1, 2]

    def test_delayed_class_assignment(self):
        rb = RuleBase(2)
        rb.learn_step([0.5, 0.5])
        tr = rb.learn_step([0.51, 0.5])
        assert tr.selected == 0 and rb.granules[0].label is None and rb.granules[0].update_count == 2
        tr = rb.learn_step([0.5, 0.49], 3)
        assert tr.labeled == 0 and rb.granules[0].label == 3
        assert rb.c == 1

    def test_inactivity_bookkeeping(self):
        rb = RuleBase(1)
        rb.learn_step([0.0], 1)
        rb.learn_step([1.0], 2)
        rb.learn_step([1.0], 2)
        assert [g.inactivity for g in rb.granules] == [2, 0]

    def test_rejects_bad_sample_without_side_effects(self):
        rb = RuleBase(2)
        rb.learn_step([0.1, 0.1], 1)
        snap = json.dumps(rb.to_dict())
        for bad in ([np.nan, 0.1], [0.1, 0.2, 0.3], [np.inf, 0.0]):
            with pytest.raises(InvalidInputError):
                rb.learn_step(bad, 1)
        assert json.dumps(rb.to_dict()) == snap

    def test_deterministic_replay(self):
        rng = np.random.default_rng(3)
        xs, ys = rng.random((300, 4)), rng.integers(1, 4, 300)

        def run():
            rb = RuleBase(4)
            return [(t.created, t.selected, t.c, t.rho, rb.digest()) for t in
                    (rb.learn_step(x, int(y)) for x, y in zip(xs, ys))]

        assert run() == run()


class TestThreshold:
    def test_unchanged_average_keeps_rho(self):
        rb = base_with(create_granule([0.1, 0.2], 1))
        rb.update_threshold()
        rb.update_threshold()
        assert rb.rho == 0.1

    def test_halving_average_halves_rho(self):
        rb = base_with(granule([0.1], [0.16], 1))
        rb.rho = 0.4
        rb.update_threshold()
        rb.granules[0].sigma = np.array([0.08])
        assert rb.update_threshold() == pytest.approx(0.2, rel=1e-15)

    def test_clamped_at_rho_max(self):
        rb = base_with(granule([0.1], [0.08], 1))
        rb.rho = 0.8
        rb.update_threshold()
        rb.granules[0].sigma = np.array([0.16])
        assert rb.update_threshold() == 1.0

    def test_clamped_at_rho_min(self):
        rb = base_with(granule([0.1], [0.16], 1), rho_min=0.05)
        rb.rho = 0.06
        rb.update_threshold()
        rb.granules[0].sigma = np.array([0.08])
        assert rb.update_threshold() == 0.05

    def test_empty_base_leaves_rho(self):
        rb = RuleBase(2)
        rb.rho = 0.3
        assert rb.update_threshold() == 0.3


class TestDistance:
    def test_identical(self):
        g = granule([0.3, 0.4], [0.1, 0.12])
        assert granule_distance(g, g.copy()) == 0.0

    def test_modal_term(self):
        assert granule_distance(granule([0.2], [0.1]), granule([0.5], [0.1])) == pytest.approx(0.3, abs=1e-15)

    def test_dispersion_term(self):
        # 0.09 + 0.16 - 2 * sqrt(0.0144) = 0.01
        assert granule_distance(granule([0.4], [0.09]), granule([0.4], [0.16])) == pytest.approx(0.01, abs=1e-15)

    def test_mismatch(self):
        with pytest.raises(InvalidInputError):
            granule_distance(granule([0.1], [0.1]), granule([0.1, 0.2], [0.1, 0.1]))

    @settings(max_examples=200)
    @given(st.integers(1, 6).flatmap(lambda n: st.tuples(
        *[st.lists(st.floats(lo, hi), min_size=n, max_size=n)
          for lo, hi in ((0, 1), (SIGMA_MIN, SIGMA_MAX), (0, 1), (SIGMA_MIN, SIGMA_MAX))])))
    def test_metric_properties(self, params):
        m1, s1, m2, s2 = params
        a, b = granule(m1, s1), granule(m2, s2)
        d = granule_distance(a, b)
        assert d >= 0
        assert d == granule_distance(b, a)
        if d == 0:
            assert m1 == m2 and np.allclose(s1, s2, rtol=0, atol=1e-15)
        # spec form of the dispersion term agrees with the squared-root form
        s1a, s2a = np.array(s1), np.array(s2)
        spec_form = np.mean(np.abs(np.array(m1) - m2) + s1a + s2a - 2 * np.sqrt(s1a * s2a))
        assert d == pytest.approx(spec_form, abs=1e-14)

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(0)
        gs = [granule(rng.random(5), rng.uniform(SIGMA_MIN, SIGMA_MAX, 5)) for _ in range(6)]
        D = pairwise_distances(np.stack([g.mu for g in gs]), np.stack([g.sigma for g in gs]))
        for i in range(6):
            for j in range(6):
                assert D[i, j] == pytest.approx(granule_distance(gs[i], gs[j]), abs=1e-15)


class TestMergePair:
    def test_equal_widths_give_midpoint(self):
        g = merge_pair(granule([0.2, 0.8], [0.1, 0.1], 1), granule([0.4, 0.6], [0.1, 0.1], 1))
        np.testing.assert_allclose(g.mu, [0.3, 0.7], atol=1e-15)

    def test_width_sum_clamped(self):
        g = merge_pair(granule([0.2], [0.08]), granule([0.3], [0.08]))
        assert g.sigma[0] == SIGMA_MAX
        assert merge_pair(granule([0.2], [0.08]), granule([0.3], [0.08]), clamp=False).sigma[0] == pytest.approx(0.16)

    def test_weighted_center(self):
        # (0.5 * 0.2 + 2 * 0.6) / (0.5 + 2) = 1.3 / 2.5
        mu, sigma = merged_parameters(granule([0.2], [0.1]), granule([0.6], [0.2]))
        assert mu[0] == pytest.approx(0.52, abs=1e-15)
        assert sigma[0] == pytest.approx(0.3, abs=1e-15)

    def test_bookkeeping(self):
        g = merge_pair(granule([0.2], [0.1], None, count=3, inactivity=5),
                       granule([0.3], [0.1], 4, count=2, inactivity=1))
        assert g.label == 4 and g.update_count == 5 and g.inactivity == 1

    def test_conflicting_labels_refused(self):
        with pytest.raises(InvalidInputError):
            merge_pair(granule([0.2], [0.1], 1), granule([0.2], [0.1], 2))


class TestMaybeMerge:
    def test_identical_same_class(self):
        rb = base_with(granule([0.3], [0.1], 1), granule([0.3], [0.1], 1))
        ev = rb.maybe_merge()
        assert ev is not None and ev.distance == 0 and rb.c == 1

    def test_too_far(self):
        rb = base_with(granule([0.2], [0.1], 1), granule([0.45], [0.1], 1))
        assert granule_distance(*rb.granules) == pytest.approx(0.25)
        assert rb.maybe_merge() is None and rb.c == 2

    def test_skips_conflicting_pair(self):
        a = granule([0.50], [0.1], 1)
        b = granule([0.55], [0.1], 2)  # closest pair, but classes conflict
        c = granule([0.58], [0.1], 1)  # a-c at 0.08
        rb = base_with(a, b, c)
        ev = rb.maybe_merge()
        assert (ev.kept, ev.removed) == (0, 2)
        assert sorted(g.label for g in rb.granules) == [1, 2]

    def test_one_merge_per_call(self):
        rb = base_with(*(granule([0.3], [0.1], 1) for _ in range(4)))
        rb.maybe_merge()
        assert rb.c == 3

    def test_merged_rule_takes_lower_slot(self):
        rb = base_with(granule([0.9], [0.1], 2), granule([0.3], [0.1], 1), granule([0.31], [0.1], 1))
        rb.maybe_merge()
        assert [g.label for g in rb.granules] == [2, 1]
        assert rb.granules[1].uid == 3

    def test_exact_pre_clamp_values(self):
        a = granule([Fraction(3, 10)], [Fraction(9, 100)], 1)
        b = granule([Fraction(32, 100)], [Fraction(1, 10)], 1)
        ra, rb_ = Fraction(9, 10), Fraction(10, 9)
        expect = (ra * Fraction(3, 10) + rb_ * Fraction(32, 100)) / (ra + rb_)
        mu, sigma = merged_parameters(a, b)
        assert mu[0] == pytest.approx(float(expect), abs=1e-15)
        assert sigma[0] == pytest.approx(0.19, abs=1e-15)


class TestPrune:
    def test_deleted_at_horizon(self):
        rb = base_with(granule([0.1], [0.1], 1, inactivity=200), granule([0.9], [0.1], 2, inactivity=199))
        assert rb.prune_inactive() == [0]
        assert rb.c == 1

    def test_infinite_horizon(self):
        rb = base_with(granule([0.1], [0.1], 1, inactivity=10 ** 9), h_r=math.inf)
        assert rb.prune_inactive() == [] and rb.c == 1

    def test_fresh_rule_kept(self):
        rb = base_with(granule([0.1], [0.1], 1))
        assert rb.prune_inactive() == []

    def test_untouched_rule_dies_after_h_r_steps(self):
        rb = RuleBase(1, HyperParams(h_r=200))
        rb.learn_step([0.0], 1)
        rb.learn_step([1.0], 2)
        deaths = []
        for _ in range(250):
            deaths += rb.learn_step([1.0], 2).deleted
            if deaths:
                break
        assert deaths == [0]
        assert rb.step == 2 + 199


def _random_stream_ops(seed, steps=400):
    rng = np.random.default_rng(seed)
    rb = RuleBase(3, HyperParams(h_r=50))
    log = []
    for _ in range(steps):
        x = rng.random(3)
        y = int(rng.integers(1, 4)) if rng.random() < 0.6 else None
        log.append(rb.learn_step(x, y))
    return rb, log


@pytest.mark.parametrize("seed", range(5))
def test_structural_accounting_and_label_stability(seed):
    rb, log = _random_stream_ops(seed)
    c = 0
    labels = {}
    for tr in log:
        c += (tr.created is not None) - (tr.merged is not None) - len(tr.deleted)
        assert c == tr.c
        assert HyperParams().rho_min <= tr.rho <= 1.0
    assert c == rb.c
    # a defined class never changes for a given rule identity
    rb2 = RuleBase(3, HyperParams(h_r=50))
    rng = np.random.default_rng(seed)
    for _ in range(400):
        x = rng.random(3)
        y = int(rng.integers(1, 4)) if rng.random() < 0.6 else None
        rb2.learn_step(x, y)
        for g in rb2.granules:
            if g.label is not None:
                assert labels.setdefault(g.uid, g.label) == g.label


@pytest.mark.parametrize("seed", range(5))
def test_creation_condition_replayable(seed):
    rng = np.random.default_rng(seed)
    rb = RuleBase(3, HyperParams(h_r=50))
    for _ in range(300):
        x = rng.random(3)
        y = int(rng.integers(1, 4)) if rng.random() < 0.6 else None
        acts = rb.activations(x)
        ok = [a > rb.rho and (y is None or g.label in (None, y)) for a, g in zip(acts, rb.granules)]
        tr = rb.learn_step(x, y)
        assert (tr.created is not None) == (not any(ok))


def test_snapshot_roundtrip():
    rb, _ = _random_stream_ops(1, 100)
    d = json.loads(json.dumps(rb.to_dict()))
    rb2 = RuleBase.from_dict(d)
    assert rb2.digest() == rb.digest()
    x = np.array([0.3, 0.6, 0.2])
    assert rb2.classify(x) == rb.classify(x)
    assert rb2.learn_step(x, 1).c == rb.learn_step(x, 1).c


def test_snapshot_rejects_foreign_document():
    with pytest.raises(InvalidInputError):
        RuleBase.from_dict({"format": "something-else"})
