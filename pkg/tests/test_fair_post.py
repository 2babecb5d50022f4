import itertools

import numpy as np
import pytest

from fairlp import lp_solver
from fairlp.analysis import brute_force_disc, is_proper
from fairlp.errors import InfeasibleBudget, InvalidInput
from fairlp.fair_post import (
    PostProblem,
    build_post_lp,
    d_max_bound_post,
    d_max_exact_post,
    d_min_post,
    derive_pred_joint,
    disc_post,
    discrimination_of,
    distortion_of,
    exact_eo_post,
    tradeoff_curve_post,
)
from fairlp.instances import fair_joint, random_classifier, random_instance
from fairlp.prob_core import (
    Channel,
    Criterion,
    DistortionMatrix,
    JointDistribution,
    PredictionJoint,
    post_induced_channel,
    tv_discrimination,
)

from oracles import deterministic_post_channels, highs_from_dump

Z1 = DistortionMatrix.zero_one(2)


def problem(seed, n_x=2, criterion=Criterion.EQUALIZED_ODDS, d=Z1):
    joint, w = random_instance(np.random.default_rng(seed), n_x)
    return PostProblem(derive_pred_joint(w, joint), d, criterion)


def proper_joint() -> PredictionJoint:
    q = np.zeros((2, 2, 2))  # [yhat, y, a]
    for a, (p_a, acc) in enumerate([(0.6, 0.9), (0.4, 0.8)]):
        for y, p_y in enumerate([0.5, 0.5]):
            q[y, y, a] = p_a * p_y * acc
            q[1 - y, y, a] = p_a * p_y * (1 - acc)
    return PredictionJoint(q)


class TestPredictionJoint:
    def test_perfect_classifier(self):
        p = np.zeros((2, 2, 2))
        p[:, 0, 0] = 0.25
        p[:, 1, 1] = 0.25
        q = derive_pred_joint(Channel.identity(2), JointDistribution(p)).q
        for yh, y, a in itertools.product(range(2), repeat=3):
            assert q[yh, y, a] == (0.25 if yh == y else 0.0)

    def test_uniform_classifier(self, instance):
        joint, _ = instance
        q = derive_pred_joint(Channel.uniform(2), joint).q
        np.testing.assert_allclose(q, np.broadcast_to(joint.p_ya.T[None] / 2, q.shape), atol=1e-15)

    def test_matches_loop(self, rng):
        joint, w = random_instance(rng, 3)
        q = derive_pred_joint(w, joint).q
        for yh, y, a in itertools.product(range(2), range(2), range(2)):
            assert q[yh, y, a] == pytest.approx(sum(w.k[x, yh] * joint.p[a, x, y] for x in range(3)), abs=1e-15)
        np.testing.assert_allclose(q.sum(axis=0), joint.p_ya.T, atol=1e-15)

    def test_shape_mismatch(self, instance):
        joint, _ = instance
        with pytest.raises(InvalidInput):
            derive_pred_joint(Channel.identity(3), joint)


class TestBuild:
    def test_variable_counts(self):
        lp = build_post_lp(problem(0), 0.4)
        assert sum(n.startswith("t[") for n in lp.names) == 4
        assert sum(n.startswith("post[") for n in lp.names) == 8
        assert sum(n.startswith("ind[") for n in lp.names) == 8

    @pytest.mark.parametrize("seed", range(5))
    def test_identity_is_feasible_at_status_quo(self, seed):
        prob = problem(seed)
        identity = Channel.identity(2)
        assert lp_solver.feasible(build_post_lp(prob, distortion_of(prob, identity)))

    @pytest.mark.parametrize("seed", range(10))
    def test_dump_matches_external_solver(self, seed):
        prob = problem(seed)
        D = 0.5 * (d_min_post(prob).value + d_max_bound_post(prob))
        lp = build_post_lp(prob, D)
        assert lp_solver.solve(lp).value == pytest.approx(highs_from_dump(lp.dumps()), abs=1e-8)


class TestDisc:
    @pytest.mark.parametrize("seed", range(5))
    def test_zero_at_uniform_channel_budget(self, seed):
        prob = problem(seed)
        assert disc_post(prob, d_max_bound_post(prob)).value <= 1e-9
        assert distortion_of(prob, Channel.uniform(2)) == pytest.approx(d_max_bound_post(prob), abs=1e-12)

    def test_fair_predictions_need_nothing(self, rng):
        prob = PostProblem(derive_pred_joint(random_classifier(rng), fair_joint(rng)), Z1)
        assert disc_post(prob, distortion_of(prob, Channel.identity(2))).value <= 1e-9

    @pytest.mark.parametrize("seed", range(6))
    def test_achievability_and_range(self, seed):
        prob = problem(seed, n_x=3)
        D = 0.5 * (d_min_post(prob).value + d_max_bound_post(prob))
        res = disc_post(prob, D)
        assert 0 <= res.value <= 2
        assert discrimination_of(prob, res.channel) == pytest.approx(res.value, abs=1e-9)
        assert distortion_of(prob, res.channel) <= D + 1e-9

    def test_grid_search_agrees(self):
        prob = problem(2)
        D = 0.5 * (d_min_post(prob).value + d_max_bound_post(prob))
        lp = disc_post(prob, D).value
        bf = brute_force_disc(prob, D, step=0.01)
        assert lp - 1e-9 <= bf.value <= lp + 1e-2

    def test_below_minimum_budget(self):
        prob = problem(3)
        with pytest.raises(InfeasibleBudget):
            disc_post(prob, d_min_post(prob).value - 1e-3)

    @pytest.mark.parametrize("seed", range(5))
    def test_status_quo_bound(self, seed):
        prob = problem(seed)
        identity = Channel.identity(2)
        original = tv_discrimination(prob.pred_joint.conditional(), prob.pred_joint.p_y)
        assert disc_post(prob, distortion_of(prob, identity)).value <= original + 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_parity_variant(self, seed):
        prob = problem(seed, criterion=Criterion.DEMOGRAPHIC_PARITY)
        assert disc_post(prob, d_max_bound_post(prob)).value <= 1e-9
        D = 0.5 * (d_min_post(prob).value + d_max_bound_post(prob))
        res = disc_post(prob, D)
        assert discrimination_of(prob, res.channel) == pytest.approx(res.value, abs=1e-9)


class TestMinimalBudget:
    def test_proper_predictor_keeps_identity(self):
        prob = PostProblem(proper_joint(), Z1)
        assert is_proper(prob.pred_joint)
        res = d_min_post(prob)
        for ch in res.channel:
            np.testing.assert_array_equal(ch.k, np.eye(2))
        best = min(distortion_of(prob, ch) for ch in deterministic_post_channels(2))
        assert res.value == pytest.approx(best, abs=1e-15)
        assert res.value == pytest.approx(distortion_of(prob, Channel.identity(2)), abs=1e-15)

    def test_zero_cost(self, instance):
        joint, w = instance
        res = d_min_post(PostProblem(derive_pred_joint(w, joint), DistortionMatrix(np.zeros((2, 2)))))
        assert res.value == 0.0
        for ch in res.channel:
            np.testing.assert_array_equal(ch.k[:, 0], 1.0)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_enumeration(self, seed):
        prob = problem(seed, n_x=3)
        res = d_min_post(prob)
        best = min(distortion_of(prob, ch) for ch in deterministic_post_channels(2))
        assert res.value == pytest.approx(best, abs=1e-12)
        assert distortion_of(prob, res.channel) == pytest.approx(res.value, abs=1e-12)

    def test_three_labels(self, rng):
        joint, w = random_instance(rng, 3, 3)
        prob = PostProblem(derive_pred_joint(w, joint), DistortionMatrix.zero_one(3))
        best = min(distortion_of(prob, ch) for ch in deterministic_post_channels(3))
        assert d_min_post(prob).value == pytest.approx(best, abs=1e-12)


class TestExactFairness:
    def test_already_fair(self, rng):
        prob = PostProblem(derive_pred_joint(random_classifier(rng), fair_joint(rng)), Z1)
        dist, channel = exact_eo_post(prob)
        assert dist <= distortion_of(prob, Channel.identity(2)) + 1e-12

    @pytest.mark.parametrize("seed", range(6))
    def test_constraints_hold(self, seed):
        prob = problem(seed, n_x=3)
        dist, channel = exact_eo_post(prob)
        cond = post_induced_channel(channel, prob.pred_joint)
        np.testing.assert_allclose(cond[0], cond[1], atol=1e-9)
        assert dist <= prob.pred_joint.p_y[0] + 1e-12  # always-1 predictor
        assert dist <= prob.pred_joint.p_y[1] + 1e-12  # always-0 predictor
        assert distortion_of(prob, channel) == pytest.approx(dist, abs=1e-9)

    def test_maximally_biased(self):
        q = np.zeros((2, 2, 2))
        q[1, :, 0] = 0.25  # group 0 always predicted 1
        q[0, :, 1] = 0.25  # group 1 always predicted 0
        prob = PostProblem(PredictionJoint(q), Z1)
        dist, _ = exact_eo_post(prob)
        assert dist == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_zero_crossing(self, seed):
        prob = problem(seed, n_x=3)
        dist, _ = exact_eo_post(prob)
        assert abs(dist - d_max_exact_post(prob)) <= 1e-6
        assert disc_post(prob, max(dist, d_min_post(prob).value)).value <= 1e-9
        if dist - 1e-4 >= d_min_post(prob).value:
            assert disc_post(prob, dist - 1e-4).value > 0


class TestCurve:
    def test_fair_instance_is_flat(self, rng):
        prob = PostProblem(derive_pred_joint(random_classifier(rng), fair_joint(rng)), Z1)
        curve = tradeoff_curve_post(prob, [distortion_of(prob, Channel.identity(2)), d_max_bound_post(prob)])
        assert np.all(curve.disc <= 1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_structure(self, seed):
        curve = tradeoff_curve_post(problem(seed, n_x=3), 17)
        assert curve.side == "post"
        assert all(curve.checks[k] for k in ("non_increasing", "convex", "chord_linear", "zero_at_d_max"))

    def test_starts_at_minimal_budget_channel(self):
        prob = problem(5)
        curve = tradeoff_curve_post(prob, 5)
        assert curve.points[0].disc == pytest.approx(discrimination_of(prob, d_min_post(prob).channel), abs=1e-7)
