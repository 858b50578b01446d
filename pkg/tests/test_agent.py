import numpy as np
import pytest

from cfrl import agent, data, env, nets, predictor, schema
from cfrl.errors import ConfigError


def make_setup(n=3, m=3, directions=None, seed=0, lam=0.5, **cfg_kw):
    directions = directions or ["any"] * n
    feats = tuple(schema.Feature(f"f{i}", direction=directions[i]) for i in range(n))
    sch = schema.FeatureSchema(features=feats, target=schema.Target("y", "classification", 2))
    stats = data.NormalizationStats(np.zeros(n), np.ones(n))
    handle = predictor.CallablePredictor(
        lambda Z: (np.atleast_2d(Z)[:, 0] > 0.5).astype(int), "classification", n, 2)
    e = env.CfEnv(sch, stats, handle, env.GoalSpec(), env.EnvConfig(lam=lam, max_features=m))
    cfg = agent.TrainConfig(per_sample_budget=200, epochs=2, hidden=(16, 16),
                            batch_size=8, target_sync=50, log_every=0, seed=seed, **cfg_kw)
    return agent.HybridQAgent(e, cfg), e


def collect_batch(ag, e, size=6, seed=0):
    rng = np.random.default_rng(seed)
    asm = agent._NStepAssembler(ag.cfg.n_step, ag.cfg.gamma)
    recs = []
    s = e.reset(rng.uniform(size=e.schema.n_features))
    enc = ag.encode(s)
    while len(recs) < size:
        a, j, vu = ag.select_action(s, 1.0, rng)
        s2, r, dk = e.apply(s, a)
        enc2 = ag.encode(s2)
        recs += asm.push(enc, vu, j, r, 0.1, enc2, dk != env.CONTINUE)
        if dk != env.CONTINUE:
            s = e.reset(rng.uniform(size=e.schema.n_features))
            enc = ag.encode(s)
        else:
            s, enc = s2, enc2
    return recs[:size]


class TestSelectAction:
    def test_full_exploration_is_uniform(self):
        from scipy.stats import chisquare

        ag, e = make_setup()
        s = e.reset(np.full(3, 0.4))
        rng = np.random.default_rng(0)
        counts = np.zeros(3)
        n = 30_000
        for _ in range(n):
            a, j, _ = ag.select_action(s, 1.0, rng)
            counts[j] += 1
        assert chisquare(counts).pvalue > 0.01

    def test_greedy_is_deterministic(self):
        ag, e = make_setup()
        s = e.reset(np.full(3, 0.4))
        first = ag.select_action(s, 0.0)
        for _ in range(5):
            a, j, vu = ag.select_action(s, 0.0)
            assert (a, j) == (first[0], first[1])
            assert np.array_equal(vu, first[2])

    def test_masked_feature_never_selected(self):
        ag, e = make_setup()
        s = e.reset(np.array([0.2, 0.5, 0.5]))
        s2, _, _ = e.apply(s, env.HybridAction(k=1, v=0.3))
        rng = np.random.default_rng(1)
        for eps in (0.0, 0.5, 1.0):
            for _ in range(200):
                a, _, _ = ag.select_action(s2, eps, rng)
                assert a.k != 1

    def test_empty_mask_rejected(self):
        ag, e = make_setup(m=3)
        s = e.reset(np.array([0.2, 0.5, 0.5]))
        for k in (0, 1, 2):
            s, _, _ = e.apply(s, env.HybridAction(k=k, v=0.01))
        with pytest.raises(ConfigError):
            ag.select_action(s, 0.0)

    def test_masked_argmax_constant_invariance(self):
        ag, e = make_setup()
        s = e.reset(np.array([0.2, 0.5, 0.5]))
        _, j_before, _ = ag.select_action(s, 0.0)
        for bias in (5.0, -3.0):
            shifted, _ = make_setup()
            shifted.q_net.copy_params_from(ag.q_net)
            shifted.pi_net.copy_params_from(ag.pi_net)
            shifted.q_net.biases[-1] += bias
            _, j_after, _ = shifted.select_action(s, 0.0)
            assert j_after == j_before

    def test_outputs_respect_direction_intervals(self):
        ag, e = make_setup(directions=["increase", "decrease", "any"])
        rng = np.random.default_rng(2)
        for _ in range(100):
            s = e.reset(rng.uniform(size=3))
            for eps in (0.0, 1.0):
                a, j, v_all = ag.select_action(s, eps, rng)
                lo, hi = e.interval(a.k)
                assert lo <= a.v <= hi
            v = ag.policy_values(ag.encode(s))
            assert (v[0] >= 0) and (v[1] <= 0) and (-1 <= v[2] <= 1)


class TestTargets:
    def test_one_step_done_is_reward(self):
        ag, e = make_setup()
        rec = agent.Transition(
            enc_s=np.zeros(6), v_all=np.zeros(3), j=0,
            ret_env=0.7, ret_bonus=0.0, enc_sn=np.zeros(6), done=True, n_eff=1)
        y = ag.compute_targets([rec])
        assert np.allclose(y, [0.7])

    def test_zero_gamma_ignores_future(self):
        ag, e = make_setup()
        cfg = agent.TrainConfig(per_sample_budget=10, epochs=1, hidden=(8, 8),
                                gamma=1e-12, seed=0)
        ag2 = agent.HybridQAgent(e, cfg)
        rec = agent.Transition(
            enc_s=np.zeros(6), v_all=np.zeros(3), j=1,
            ret_env=0.25, ret_bonus=0.0, enc_sn=np.concatenate([np.full(3, 0.5), np.zeros(3)]),
            done=False, n_eff=1)
        y = ag2.compute_targets([rec])
        assert abs(y[0] - 0.25) < 1e-9

    def test_three_step_matches_manual_unroll(self):
        ag, e = make_setup(m=3, lam=1.0)
        rng = np.random.default_rng(3)
        x = np.array([0.3, 0.6, 0.2])
        s = e.reset(x)
        enc = ag.encode(s)
        asm = agent._NStepAssembler(3, ag.cfg.gamma)
        steps = []
        recs = []
        for k in (1, 2, 0):
            a = env.HybridAction(k=k, v=0.05)
            s2, r, dk = e.apply(s, a)
            enc2 = ag.encode(s2)
            vu = np.zeros(3)
            steps.append((r, 0.2))
            recs += asm.push(enc, vu, ag._slot[k], r, 0.2, enc2, dk != env.CONTINUE)
            s, enc = s2, enc2
        g = ag.cfg.gamma
        manual_env = steps[0][0] + g * steps[1][0] + g * g * steps[2][0]
        manual_bonus = 0.2 * (1 + g + g * g)
        head = recs[0]
        assert head.n_eff == 3
        assert abs(head.ret_env - manual_env) < 1e-12
        assert abs(head.ret_bonus - manual_bonus) < 1e-12
        y = ag.compute_targets([head], bonus_factor=1.0)
        assert abs(y[0] - (manual_env + manual_bonus)) < 1e-9  # done episode: no bootstrap

    def test_no_bootstrap_past_done(self):
        ag, e = make_setup()
        rec_done = agent.Transition(
            enc_s=np.zeros(6), v_all=np.zeros(3), j=0,
            ret_env=1.0, ret_bonus=0.0, enc_sn=np.full(6, 0.25), done=True, n_eff=2)
        y = ag.compute_targets([rec_done])
        assert y[0] == 1.0


class TestLossQ:
    def test_zero_when_q_matches_targets_and_rnd_distilled(self):
        ag, e = make_setup()
        ag.rnd_state.predictor.copy_params_from(ag.rnd_state.target)
        recs = collect_batch(ag, e, size=4)
        enc = np.stack([r.enc_s for r in recs])
        v = np.stack([r.v_all for r in recs])
        q, _ = nets.forward(ag.q_net, np.concatenate([enc, v], axis=1))
        y = q[np.arange(4), [r.j for r in recs]]
        loss_td, loss_rnd, _, _, resid = ag.loss_q(recs, y, np.ones(4))
        assert loss_td == 0.0
        assert loss_rnd == 0.0
        assert np.allclose(resid, 0.0)

    def test_is_weights_scale_linearly(self):
        ag, e = make_setup()
        recs = collect_batch(ag, e, size=4)
        y = ag.compute_targets(recs)
        l1, _, _, _, _ = ag.loss_q(recs, y, np.ones(4))
        l2, _, _, _, _ = ag.loss_q(recs, y, 2 * np.ones(4))
        assert np.isclose(l2, 2 * l1)


class TestLossPi:
    def test_policy_gradient_zero_when_q_ignores_v(self):
        ag, e = make_setup(policy_reg=0.0)
        # zero every weight column that reads the v part of the input
        ag.q_net.weights[0][:, ag.enc_dim:] = 0.0
        ag.rnd_action.predictor.copy_params_from(ag.rnd_action.target)
        recs = collect_batch(ag, e, size=4)
        _, _, grads_pi, _ = ag.loss_pi(recs)
        for g in grads_pi.d_weights + grads_pi.d_biases:
            assert np.allclose(g, 0.0, atol=1e-12)

    def test_q_net_untouched_by_policy_update(self):
        ag, e = make_setup()
        recs = collect_batch(ag, e, size=4)
        before = [p.copy() for p in ag.q_net.parameters()]
        _, _, grads_pi, grads_ra = ag.loss_pi(recs)
        nets.apply_update(ag.pi_net, grads_pi, ag.opt_pi)
        nets.apply_update(ag.rnd_action.predictor, grads_ra, ag.rnd_action.optimizer)
        for b, p in zip(before, ag.q_net.parameters()):
            assert np.array_equal(b, p)

    def test_policy_climbs_toward_known_maximizer(self):
        """Hand-built piecewise-linear Q with its peak at v0 = 0.3: ascent
        moves the policy output monotonically toward the peak."""
        ag, e = make_setup(n=1, m=1, policy_reg=0.0)
        # Q(s, v) = -|v - 0.3| via two ReLU units; reads only the v input
        q = nets.DenseNet([ag.enc_dim + 1, 2, 1], "identity")
        q.weights = [np.zeros((2, ag.enc_dim + 1)), np.array([[-1.0, -1.0]])]
        q.weights[0][0, ag.enc_dim] = 1.0
        q.weights[0][1, ag.enc_dim] = -1.0
        q.biases = [np.array([-0.3, 0.3]), np.array([0.0])]
        ag.q_net = q
        ag.rnd_action = type(ag.rnd_action)(ag.enc_dim + 1 + 1, 8, 4, seed=0, scale=0.0)
        ag.rnd_action.predictor.copy_params_from(ag.rnd_action.target)
        s = e.reset(np.array([0.4]))
        recs = [agent.Transition(
            enc_s=ag.encode(s), v_all=np.zeros(1), j=0,
            ret_env=0.0, ret_bonus=0.0, enc_sn=ag.encode(s), done=True, n_eff=1)]
        dist = []
        for _ in range(100):
            v = ag.policy_values(ag.encode(s))
            dist.append(abs(v[0] - 0.3))
            _, _, grads_pi, _ = ag.loss_pi(recs)
            nets.apply_update(ag.pi_net, grads_pi, ag.opt_pi)
        assert dist[-1] < dist[0]
        assert all(b <= a + 1e-9 for a, b in zip(dist, dist[1:]))


class TestTraining:
    def test_gradient_isolation_across_updates(self):
        ag, e = make_setup()
        recs = collect_batch(ag, e, size=8)
        for r in recs:
            ag.replay.push(r)
        theta2_before = [p.copy() for p in ag.pi_net.parameters()]
        eta2_before = [p.copy() for p in ag.rnd_action.predictor.parameters()]
        y = ag.compute_targets(recs)
        _, _, grads_q, grads_rs, _ = ag.loss_q(recs, y, np.ones(len(recs)))
        nets.apply_update(ag.q_net, grads_q, ag.opt_q)
        nets.apply_update(ag.rnd_state.predictor, grads_rs, ag.rnd_state.optimizer)
        for b, p in zip(theta2_before, ag.pi_net.parameters()):
            assert np.array_equal(b, p)
        for b, p in zip(eta2_before, ag.rnd_action.predictor.parameters()):
            assert np.array_equal(b, p)

    def test_target_sync_is_exact_copy(self):
        ag, e = make_setup()
        ag.q_net.weights[0] += 0.25
        ag.pi_net.weights[0] -= 0.25
        ag.sync_targets()
        for a, b in zip(ag.q_net.parameters(), ag.q_target.parameters()):
            assert np.array_equal(a, b)
        for a, b in zip(ag.pi_net.parameters(), ag.pi_target.parameters()):
            assert np.array_equal(a, b)

    def test_seeded_runs_reproduce_logs(self, toy_separable):
        norm, stats, handle = toy_separable
        cfg = agent.TrainConfig(per_sample_budget=150, epochs=2, hidden=(16, 16),
                                batch_size=16, log_every=50, seed=123)
        goal, ecfg = env.GoalSpec(), env.EnvConfig(lam=0.5, max_features=2)
        _, log1 = agent.train_global(norm, stats, handle, goal, ecfg, cfg)
        _, log2 = agent.train_global(norm, stats, handle, goal, ecfg, cfg)
        assert log1 == log2


class TestSnapshot:
    def test_save_load_reproduces_greedy_action(self, toy_separable, tmp_path):
        norm, stats, handle = toy_separable
        cfg = agent.TrainConfig(per_sample_budget=100, epochs=1, hidden=(16, 16),
                                batch_size=16, log_every=0, seed=5)
        snap, _ = agent.train_global(norm, stats, handle, env.GoalSpec(),
                                     env.EnvConfig(lam=0.5, max_features=2), cfg)
        path = tmp_path / "policy.zip"
        snap.save(path)
        loaded = agent.PolicySnapshot.load(path)
        a1 = snap.build_agent(handle)
        a2 = loaded.build_agent(handle)
        s1 = a1.env.reset(norm.rows[0])
        s2 = a2.env.reset(norm.rows[0])
        act1, j1, v1 = a1.select_action(s1, 0.0)
        act2, j2, v2 = a2.select_action(s2, 0.0)
        assert (act1.k, act1.v, j1) == (act2.k, act2.v, j2)
        assert np.array_equal(v1, v2)

    def test_corrupt_snapshot_rejected(self, tmp_path):
        path = tmp_path / "bad.zip"
        path.write_bytes(b"garbage")
        with pytest.raises(ConfigError):
            agent.PolicySnapshot.load(path)

    def test_zero_budget_fine_tune_returns_same_snapshot(self, toy_separable):
        norm, stats, handle = toy_separable
        cfg = agent.TrainConfig(per_sample_budget=100, epochs=1, hidden=(16, 16),
                                batch_size=16, log_every=0, seed=6)
        snap, _ = agent.train_global(norm, stats, handle, env.GoalSpec(),
                                     env.EnvConfig(lam=0.5, max_features=2), cfg)
        tuned, log = agent.fine_tune_local(snap, norm.rows[0], handle, budget_fraction=0.0)
        assert tuned is snap
        assert log == []

    def test_fine_tune_changes_only_live_copy(self, toy_separable):
        norm, stats, handle = toy_separable
        cfg = agent.TrainConfig(per_sample_budget=100, epochs=2, hidden=(16, 16),
                                batch_size=16, log_every=0, seed=7)
        snap, _ = agent.train_global(norm, stats, handle, env.GoalSpec(),
                                     env.EnvConfig(lam=0.5, max_features=2), cfg)
        q_before = [p.copy() for p in snap.q_net.parameters()]
        agent.fine_tune_local(snap, norm.rows[0], handle, budget_fraction=0.5)
        for b, p in zip(q_before, snap.q_net.parameters()):
            assert np.array_equal(b, p)


class TestExplain:
    def test_valid_result_meets_goal_and_proximity_checks(self, toy_separable):
        norm, stats, handle = toy_separable
        e = env.CfEnv(norm.schema, stats, handle, env.GoalSpec(), env.EnvConfig(lam=0.5, max_features=2))
        cfg = agent.TrainConfig(per_sample_budget=100, epochs=1, hidden=(16, 16),
                                batch_size=16, log_every=0, seed=8)
        ag = agent.HybridQAgent(e, cfg)
        for x in norm.rows[:10]:
            res = ag.explain(x)
            if res.valid:
                assert env.lpred(x, res.counterfactual, handle, e.goal) == 0
                assert np.isclose(res.proximity, np.abs(res.counterfactual - x).sum())
                assert res.sparsity == int(np.sum(res.counterfactual != x))

    def test_single_step_solution_has_sparsity_one(self):
        ag, e = make_setup(n=2, m=2)
        # force a policy that flips feature 0 hard in one step
        ag.pi_net.weights[-1][:] = 0.0
        ag.pi_net.biases[-1][:] = np.array([-5.0, 0.0])   # tanh(-5) ~ -1
        ag.q_net.biases[-1][:] = np.array([1.0, 0.0])     # prefer slot 0
        res = ag.explain(np.array([0.9, 0.5]))
        assert res.valid and res.sparsity == 1
