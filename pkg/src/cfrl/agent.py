"""Hybrid-action Q-learning for counterfactual generation.

Two networks drive the agent: a Q network scoring every actionable feature
given the state encoding and the full continuous-parameter vector, and a
deterministic policy network emitting that parameter vector (tanh-bounded,
rescaled per feature to its allowed interval). Training follows the
prioritized-replay loop with n-step targets and two-level novelty bonuses:
the state bonus augments stored rewards, the action bonus enters the
policy loss only. A trained policy can be snapshotted, fine-tuned around
one target instance on ball-sampled neighbors, and rolled out greedily to
produce counterfactuals.
"""

from __future__ import annotations

import json
import time
import zipfile
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets
from .curiosity import RndModule
from .data import Dataset, NormalizationStats, sample_neighborhood
from .env import BUDGET, CONTINUE, SUCCESS, CfEnv, EnvConfig, GoalSpec, HybridAction
from .errors import ConfigError, TransportError
from .metrics import CfResult
from .replay import PrioritizedReplay
from .schema import FeatureSchema, schema_from_dict, schema_to_json

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    per_sample_budget: int = 50_000     # interaction budget per drawn sample
    epochs: int = 10                    # outer draws of a training instance
    gamma: float = 0.99
    n_step: int = 3
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5           # schedule spans this fraction of total steps
    lr_q: float = 1e-3
    lr_pi: float = 1e-4
    lr_rnd_state: float = 1e-4
    lr_rnd_action: float = 1e-4
    batch_size: int = 64
    replay_capacity: int = 2**16
    target_sync: int = 1000             # hard target copy every this many updates
    hidden: tuple = (128, 128)
    curiosity_scale: float = 1.0
    curiosity_anneal: float = 1.0       # fraction of total steps over which the scale decays to 0; 0 disables
    rnd_hidden: int = 64
    rnd_embed: int = 32
    optimizer: str = "adam"
    train_every: int = 1
    updates_per_step: int = 1
    policy_reg: float = 1e-2            # L2 pull on tanh outputs; counters saturation lock-in
    is_exponent_start: float = 0.4
    probe_size: int = 20
    probe_every: int = 1                # evaluate the probe set every this many epochs
    log_every: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.per_sample_budget < 1:
            raise ConfigError("per-sample budget must be >= 1")
        if self.n_step < 1:
            raise ConfigError("n_step must be >= 1")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.per_sample_budget

    def to_dict(self) -> dict:
        from dataclasses import asdict

        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        if "hidden" in doc:
            doc["hidden"] = tuple(doc["hidden"])
        return cls(**doc)


@dataclass
class Transition:
    """Matured n-step record ready for the replay buffer.

    Environment and novelty-bonus return components are kept separate so
    the bonus weight in the training target follows the current anneal
    factor instead of being frozen at storage time; the modified reward
    consumed by the learner is ``ret_env + factor * ret_bonus``.
    """

    enc_s: np.ndarray       # state encoding at t
    v_all: np.ndarray       # parameter vector actually used at t
    j: int                  # discrete action slot (index into the action set)
    ret_env: float          # discounted environment-reward sum over n_eff steps
    ret_bonus: float        # discounted state-novelty bonus sum over n_eff steps
    enc_sn: np.ndarray      # encoding after n_eff steps
    done: bool              # episode ended within the window
    n_eff: int


class _NStepAssembler:
    """Turns a stream of raw steps into n-step transitions."""

    def __init__(self, n: int, gamma: float):
        self.n = n
        self.gamma = gamma
        self._pending: list = []

    def push(self, enc_s, v_all, j, reward, bonus, enc_next, done) -> list[Transition]:
        self._pending.append([enc_s, v_all, j, reward, bonus, enc_next, done])
        out = []
        if len(self._pending) == self.n:
            out.append(self._emit())
        if done:
            while self._pending:
                out.append(self._emit())
        return out

    def _emit(self) -> Transition:
        head = self._pending[0]
        ret_env = 0.0
        ret_bonus = 0.0
        for i, step in enumerate(self._pending):
            ret_env += (self.gamma**i) * step[3]
            ret_bonus += (self.gamma**i) * step[4]
        tail = self._pending[-1]
        self._pending.pop(0)
        return Transition(
            enc_s=head[0], v_all=head[1], j=head[2], ret_env=ret_env, ret_bonus=ret_bonus,
            enc_sn=tail[5], done=bool(tail[6]), n_eff=len(self._pending) + 1,
        )

    def flush(self) -> list[Transition]:
        out = []
        while self._pending:
            out.append(self._emit())
        return out


class HybridQAgent:
    """Owns the four learnable networks, their targets and the replay
    buffer for one environment (schema + goal + predictor binding)."""

    def __init__(self, env: CfEnv, cfg: TrainConfig):
        self.env = env
        self.cfg = cfg
        self.n_features = env.schema.n_features
        self.n_actions = env.n_actions
        self.enc_dim = self.n_features + self.n_actions

        seeds = np.random.SeedSequence(cfg.seed).spawn(6)
        seed_ints = [int(s.generate_state(1)[0]) for s in seeds]
        hid = list(cfg.hidden)
        self.q_net = nets.init_net([self.enc_dim + self.n_actions, *hid, self.n_actions],
                                   "identity", seed=seed_ints[0])
        self.pi_net = nets.init_net([self.enc_dim, *hid, self.n_actions],
                                    "tanh", seed=seed_ints[1])
        self.q_target = self.q_net.copy()
        self.pi_target = self.pi_net.copy()
        self.rnd_state = RndModule(self.enc_dim, cfg.rnd_hidden, cfg.rnd_embed,
                                   seed=seed_ints[2], learning_rate=cfg.lr_rnd_state,
                                   scale=cfg.curiosity_scale)
        self.rnd_action = RndModule(self.enc_dim + self.n_actions + 1, cfg.rnd_hidden,
                                    cfg.rnd_embed, seed=seed_ints[3],
                                    learning_rate=cfg.lr_rnd_action,
                                    scale=cfg.curiosity_scale)
        self.opt_q = nets.Optimizer(cfg.optimizer, cfg.lr_q)
        self.opt_pi = nets.Optimizer(cfg.optimizer, cfg.lr_pi)
        self.rnd_state.optimizer = nets.Optimizer(cfg.optimizer, cfg.lr_rnd_state)
        self.rnd_action.optimizer = nets.Optimizer(cfg.optimizer, cfg.lr_rnd_action)
        self.replay = PrioritizedReplay(cfg.replay_capacity,
                                        is_exponent=cfg.is_exponent_start)
        self.rng = np.random.default_rng(seed_ints[4])

        intervals = np.array([env.interval(k) for k in env.action_set])
        self._lo = intervals[:, 0]
        self._hi = intervals[:, 1]
        self._slot = {k: j for j, k in enumerate(env.action_set)}
        self.updates = 0
        self.global_step = 0

    # ---- encodings -------------------------------------------------

    def encode(self, state) -> np.ndarray:
        f = np.zeros(self.n_actions)
        for k in state.used:
            f[self._slot[k]] = 1.0
        return np.concatenate([state.x, f])

    @staticmethod
    def _mask_from_enc(enc_batch: np.ndarray, n_features: int) -> np.ndarray:
        """Available-action mask recovered from the f-part of encodings."""
        return enc_batch[:, n_features:] == 0.0

    def rescale(self, u: np.ndarray) -> np.ndarray:
        """Map tanh outputs in [-1, 1] onto each feature's allowed interval."""
        return self._lo + (u + 1.0) * 0.5 * (self._hi - self._lo)

    # ---- acting ----------------------------------------------------

    def policy_values(self, enc: np.ndarray, target: bool = False):
        net = self.pi_target if target else self.pi_net
        u, _ = nets.forward(net, enc)
        return self.rescale(u)

    def q_values(self, enc: np.ndarray, v_all: np.ndarray, target: bool = False):
        net = self.q_target if target else self.q_net
        q, _ = nets.forward(net, np.concatenate([enc, v_all], axis=-1))
        return q

    def select_action(self, state, eps: float, rng: np.random.Generator | None = None):
        """Epsilon-greedy over the discrete slot; the continuous magnitude
        comes from the policy net, with clipped Gaussian noise only on the
        exploration branch. Returns (action, slot, parameter vector used)."""
        rng = rng or self.rng
        mask = [k for k in self.env.action_set if k not in state.used]
        if not mask:
            raise ConfigError("select_action on a state with no available features")
        enc = self.encode(state)
        v_all = self.policy_values(enc)
        if eps > 0 and rng.uniform() < eps:
            k = mask[rng.integers(len(mask))]
            j = self._slot[k]
            lo, hi = self._lo[j], self._hi[j]
            noise = rng.normal(0.0, 0.1 * (hi - lo))
            v = float(np.clip(v_all[j] + noise, lo, hi))
        else:
            q = self.q_values(enc, v_all)
            allowed = np.full(self.n_actions, -np.inf)
            for k in mask:
                allowed[self._slot[k]] = q[self._slot[k]]
            j = int(np.argmax(allowed))
            k = self.env.action_set[j]
            v = float(v_all[j])
        v_used = v_all.copy()
        v_used[j] = v
        return HybridAction(k=k, v=v), j, v_used

    # ---- learning --------------------------------------------------

    def compute_targets(self, records: list[Transition],
                        bonus_factor: float | None = None) -> np.ndarray:
        """n-step bootstrapped targets with the target networks; no
        bootstrap past episode end. ``bonus_factor`` weights the stored
        novelty-return component (defaults to the current anneal factor)."""
        if bonus_factor is None:
            bonus_factor = self.curiosity_factor()
        y = np.array([r.ret_env + bonus_factor * r.ret_bonus for r in records])
        boot = [i for i, r in enumerate(records) if not r.done]
        if boot:
            enc_n = np.stack([records[i].enc_sn for i in boot])
            v_n = self.policy_values(enc_n, target=True)
            q_n = self.q_values(enc_n, v_n, target=True)
            avail = self._mask_from_enc(enc_n, self.n_features)
            q_n = np.where(avail, q_n, -np.inf)
            max_q = q_n.max(axis=1)
            max_q = np.where(np.isfinite(max_q), max_q, 0.0)
            for row, i in enumerate(boot):
                y[i] += (self.cfg.gamma ** records[i].n_eff) * max_q[row]
        return y

    def loss_q(self, records: list[Transition], y: np.ndarray, weights: np.ndarray):
        """Importance-weighted squared TD residual on the taken slot plus
        the state-novelty distillation term. Returns the two loss values,
        gradients for the Q net and the state-RND predictor, and the
        residuals for priority updates."""
        enc = np.stack([r.enc_s for r in records])
        v_all = np.stack([r.v_all for r in records])
        q, tape = nets.forward(self.q_net, np.concatenate([enc, v_all], axis=1))
        rows = np.arange(len(records))
        js = np.array([r.j for r in records])
        resid = q[rows, js] - y
        w = np.asarray(weights, dtype=float)
        loss_td = float(np.mean(w * resid**2))
        gout = np.zeros_like(q)
        gout[rows, js] = 2.0 * w * resid / len(records)
        grads_q = nets.backward(self.q_net, tape, gout)
        loss_rnd, grads_rnd = self.rnd_state.distill_loss(enc)
        return loss_td, loss_rnd, grads_q, grads_rnd, resid

    def loss_pi(self, records: list[Transition], action_novelty_weight: float = 1.0):
        """Negative masked Q-sum at current policy outputs plus the
        action-novelty distillation term; gradients flow to the policy
        net (through the continuous parameters only) and to the
        action-RND predictor. ``action_novelty_weight`` scales the novelty
        term's pull on the policy (annealed alongside the reward bonus);
        the distillation gradient for the predictor is unaffected."""
        enc = np.stack([r.enc_s for r in records])
        B = len(records)
        u, tape_pi = nets.forward(self.pi_net, enc)
        v = self.rescale(u)
        q, tape_q = nets.forward(self.q_net, np.concatenate([enc, v], axis=1))
        avail = self._mask_from_enc(enc, self.n_features).astype(float)
        reg = self.cfg.policy_reg
        loss_q_term = float(-(q * avail).sum(axis=1).mean() + reg * (u**2).sum(axis=1).mean())

        gout_q = -avail / B
        d_qin = nets.backward(self.q_net, tape_q, gout_q).d_input
        dv = d_qin[:, self.enc_dim:]

        # action novelty on the current greedy action
        q_masked = np.where(avail > 0, q, -np.inf)
        j_star = np.argmax(q_masked, axis=1)
        rows = np.arange(B)
        onehot = np.zeros((B, self.n_actions))
        onehot[rows, j_star] = 1.0
        z = np.concatenate([enc, onehot, v[rows, j_star][:, None]], axis=1)
        t_out, tape_t = nets.forward(self.rnd_action.target, z)
        p_out, tape_p = nets.forward(self.rnd_action.predictor, z)
        diff = p_out - t_out
        loss_rnd = float((diff**2).sum(axis=1).mean())
        gout_rnd = 2.0 * diff / B
        grads_rnd = nets.backward(self.rnd_action.predictor, tape_p, gout_rnd)
        d_z = grads_rnd.d_input + nets.backward(self.rnd_action.target, tape_t, -gout_rnd).d_input
        dv[rows, j_star] += action_novelty_weight * d_z[:, -1]

        du = dv * 0.5 * (self._hi - self._lo) + 2.0 * reg * u / B
        grads_pi = nets.backward(self.pi_net, tape_pi, du)
        return loss_q_term, loss_rnd, grads_pi, grads_rnd

    def train_step(self):
        """One replay sample plus the four parameter updates; returns the
        logged loss pair or None when the buffer is still filling."""
        cfg = self.cfg
        if len(self.replay) < max(cfg.batch_size, cfg.n_step + 1):
            return None
        frac = min(1.0, self.global_step / max(1, cfg.total_steps))
        self.replay.is_exponent = cfg.is_exponent_start + (1.0 - cfg.is_exponent_start) * frac
        batch = self.replay.sample(cfg.batch_size, self.rng)
        y = self.compute_targets(batch.records)
        loss_td, _, grads_q, grads_rs, resid = self.loss_q(batch.records, y, batch.weights)
        nets.apply_update(self.q_net, grads_q, self.opt_q)
        nets.apply_update(self.rnd_state.predictor, grads_rs, self.rnd_state.optimizer)
        loss_pi, _, grads_pi, grads_ra = self.loss_pi(
            batch.records, action_novelty_weight=self.curiosity_factor())
        nets.apply_update(self.pi_net, grads_pi, self.opt_pi)
        nets.apply_update(self.rnd_action.predictor, grads_ra, self.rnd_action.optimizer)
        self.replay.update_priorities(batch.indices, np.abs(resid))
        self.updates += 1
        if self.updates % cfg.target_sync == 0:
            self.sync_targets()
        return loss_td, loss_pi

    def sync_targets(self) -> None:
        self.q_target.copy_params_from(self.q_net)
        self.pi_target.copy_params_from(self.pi_net)

    def epsilon(self) -> float:
        cfg = self.cfg
        span = max(1, int(cfg.total_steps * cfg.eps_fraction))
        frac = min(1.0, self.global_step / span)
        return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac

    def curiosity_factor(self) -> float:
        """Linear decay of the novelty-bonus scale; a late-training bonus
        of zero removes the incentive to stretch episodes for bonus
        collection."""
        cfg = self.cfg
        if cfg.curiosity_anneal <= 0:
            return 1.0
        span = max(1, int(cfg.total_steps * cfg.curiosity_anneal))
        return max(0.0, 1.0 - self.global_step / span)

    # ---- rollout ---------------------------------------------------

    def explain(self, x: np.ndarray, instance_id: str = "",
                stats: NormalizationStats | None = None) -> CfResult:
        """Greedy rollout (no exploration) from an instance until the goal
        is met or the feature budget runs out."""
        t0 = time.perf_counter()
        state = self.env.reset(np.asarray(x, dtype=float))
        done = CONTINUE
        while done == CONTINUE:
            action, _, _ = self.select_action(state, eps=0.0)
            state, _, done = self.env.apply(state, action)
        elapsed = time.perf_counter() - t0
        if done == SUCCESS:
            cf = state.x.copy()
            prox_raw = None
            if stats is not None:
                from .data import denormalize

                prox_raw = float(np.abs(denormalize(cf, stats) - denormalize(state.x0, stats)).sum())
            return CfResult(
                original=state.x0.copy(), counterfactual=cf, valid=True,
                proximity=float(np.abs(cf - state.x0).sum()),
                sparsity=int(np.sum(cf != state.x0)),
                gen_time_s=elapsed, proximity_raw=prox_raw, instance_id=instance_id,
            )
        return CfResult(
            original=state.x0.copy(), counterfactual=state.x.copy(), valid=False,
            proximity=None, sparsity=None, gen_time_s=elapsed, instance_id=instance_id,
        )

    def probe_validity(self, instances: np.ndarray) -> float:
        ok, total = 0, 0
        for x in instances:
            try:
                result = self.explain(x)
            except ConfigError:
                continue  # e.g. targeted goal already satisfied
            total += 1
            ok += int(result.valid)
        return ok / total if total else 0.0


@dataclass
class PolicySnapshot:
    """Frozen agent: all eight parameter sets plus the context needed to
    rebuild an identical greedy actor elsewhere."""

    schema: FeatureSchema
    stats: NormalizationStats
    goal: GoalSpec
    env_config: EnvConfig
    train_config: TrainConfig
    q_net: nets.DenseNet
    pi_net: nets.DenseNet
    q_target: nets.DenseNet
    pi_target: nets.DenseNet
    rnd_state_target: nets.DenseNet
    rnd_state_pred: nets.DenseNet
    rnd_action_target: nets.DenseNet
    rnd_action_pred: nets.DenseNet
    rnd_meta: dict = field(default_factory=dict)
    trained_steps: int = 0

    @classmethod
    def of(cls, agent: HybridQAgent) -> "PolicySnapshot":
        return cls(
            schema=agent.env.schema,
            stats=agent.env.stats,
            goal=agent.env.goal,
            env_config=agent.env.config,
            train_config=agent.cfg,
            q_net=agent.q_net.copy(),
            pi_net=agent.pi_net.copy(),
            q_target=agent.q_target.copy(),
            pi_target=agent.pi_target.copy(),
            rnd_state_target=agent.rnd_state.target.copy(),
            rnd_state_pred=agent.rnd_state.predictor.copy(),
            rnd_action_target=agent.rnd_action.target.copy(),
            rnd_action_pred=agent.rnd_action.predictor.copy(),
            rnd_meta={
                "state": [agent.rnd_state._count, agent.rnd_state._mean, agent.rnd_state._m2],
                "action": [agent.rnd_action._count, agent.rnd_action._mean, agent.rnd_action._m2],
            },
            trained_steps=agent.global_step,
        )

    def build_agent(self, handle, goal: GoalSpec | None = None,
                    env_config: EnvConfig | None = None,
                    train_config: TrainConfig | None = None) -> HybridQAgent:
        """Reconstruct a live agent around a predictor handle; optional
        overrides keep the saved nets but change goal or budgets."""
        cfg = train_config or self.train_config
        env = CfEnv(self.schema, self.stats, handle, goal or self.goal,
                    env_config or self.env_config)
        agent = HybridQAgent(env, cfg)
        if agent.q_net.layer_sizes != self.q_net.layer_sizes:
            raise ConfigError("snapshot architecture does not match the environment")
        agent.q_net.copy_params_from(self.q_net)
        agent.pi_net.copy_params_from(self.pi_net)
        agent.q_target.copy_params_from(self.q_target)
        agent.pi_target.copy_params_from(self.pi_target)
        agent.rnd_state.target.copy_params_from(self.rnd_state_target)
        agent.rnd_state.predictor.copy_params_from(self.rnd_state_pred)
        agent.rnd_action.target.copy_params_from(self.rnd_action_target)
        agent.rnd_action.predictor.copy_params_from(self.rnd_action_pred)
        if self.rnd_meta:
            for mod, key in ((agent.rnd_state, "state"), (agent.rnd_action, "action")):
                count, mean, m2 = self.rnd_meta[key]
                mod._count, mod._mean, mod._m2 = int(count), float(mean), float(m2)
        return agent

    def save(self, path) -> None:
        meta = {
            "version": SNAPSHOT_VERSION,
            "schema": json.loads(schema_to_json(self.schema)),
            "schema_fingerprint": self.schema.fingerprint(),
            "stats": self.stats.to_dict(),
            "goal": self.goal.to_dict(),
            "env_config": self.env_config.to_dict(),
            "train_config": self.train_config.to_dict(),
            "rnd_meta": self.rnd_meta,
            "trained_steps": self.trained_steps,
        }
        members = {
            "q.bin": self.q_net, "pi.bin": self.pi_net,
            "q_target.bin": self.q_target, "pi_target.bin": self.pi_target,
            "rnd_s_target.bin": self.rnd_state_target, "rnd_s_pred.bin": self.rnd_state_pred,
            "rnd_a_target.bin": self.rnd_action_target, "rnd_a_pred.bin": self.rnd_action_pred,
        }
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("meta.json", json.dumps(meta, indent=2))
            for name, net in members.items():
                zf.writestr(name, nets.params_to_bytes(net))

    @classmethod
    def load(cls, path) -> "PolicySnapshot":
        try:
            with zipfile.ZipFile(path) as zf:
                meta = json.loads(zf.read("meta.json"))
                if meta.get("version") != SNAPSHOT_VERSION:
                    raise ConfigError(f"{path}: unsupported snapshot version {meta.get('version')}")
                read_net = lambda name: nets.params_from_bytes(zf.read(name), source=f"{path}!{name}")
                return cls(
                    schema=schema_from_dict(meta["schema"]),
                    stats=NormalizationStats.from_dict(meta["stats"]),
                    goal=GoalSpec.from_dict(meta["goal"]),
                    env_config=EnvConfig.from_dict(meta["env_config"]),
                    train_config=TrainConfig.from_dict(meta["train_config"]),
                    q_net=read_net("q.bin"), pi_net=read_net("pi.bin"),
                    q_target=read_net("q_target.bin"), pi_target=read_net("pi_target.bin"),
                    rnd_state_target=read_net("rnd_s_target.bin"),
                    rnd_state_pred=read_net("rnd_s_pred.bin"),
                    rnd_action_target=read_net("rnd_a_target.bin"),
                    rnd_action_pred=read_net("rnd_a_pred.bin"),
                    rnd_meta=meta.get("rnd_meta", {}),
                    trained_steps=int(meta.get("trained_steps", 0)),
                )
        except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: not a valid snapshot file: {exc}") from exc


def _run_training(agent: HybridQAgent, draw_instance, cfg: TrainConfig,
                  probe: np.ndarray | None, log: list) -> None:
    """Shared training loop: repeated episodes on drawn instances, replay
    updates every ``train_every`` steps, probe validity once per epoch."""
    env = agent.env
    for epoch in range(cfg.epochs):
        x = draw_instance(agent.rng)
        assembler = _NStepAssembler(cfg.n_step, cfg.gamma)
        state = env.reset(x)
        enc = agent.encode(state)
        last_q, last_pi = float("nan"), float("nan")
        for _ in range(cfg.per_sample_budget):
            action, j, v_used = agent.select_action(state, agent.epsilon())
            next_state, reward, done_kind = env.apply(state, action)
            enc_next = agent.encode(next_state)
            bonus = agent.rnd_state.bonus(enc_next)
            done = done_kind != CONTINUE
            for rec in assembler.push(enc, v_used, j, reward, bonus, enc_next, done):
                agent.replay.push(rec)
            if agent.global_step % cfg.train_every == 0:
                for _ in range(cfg.updates_per_step):
                    losses = agent.train_step()
                    if losses is not None:
                        last_q, last_pi = losses
            agent.global_step += 1
            if cfg.log_every and agent.global_step % cfg.log_every == 0:
                log.append({"step": agent.global_step, "loss_q": last_q, "loss_pi": last_pi})
            if done:
                state = env.reset(x)
                enc = agent.encode(state)
            else:
                state, enc = next_state, enc_next
        last_epoch = epoch == cfg.epochs - 1
        if probe is not None and len(probe) and ((epoch + 1) % cfg.probe_every == 0 or last_epoch):
            log.append({"epoch": epoch + 1, "step": agent.global_step,
                        "probe_validity": agent.probe_validity(probe)})


def train_global(train: Dataset, stats: NormalizationStats, handle, goal: GoalSpec,
                 env_config: EnvConfig, cfg: TrainConfig,
                 probe: np.ndarray | None = None,
                 checkpoint_path=None) -> tuple[PolicySnapshot, list]:
    """Train one agent over a whole normalized training set (one instance
    drawn per epoch, episodes repeating within the per-sample budget)."""
    if not train.normalized:
        raise ConfigError("train the agent on normalized data")
    env = CfEnv(train.schema, stats, handle, goal, env_config)
    agent = HybridQAgent(env, cfg)
    log: list = []

    eligible = _eligible_rows(train.rows, handle, goal)
    if probe is None:
        pick = np.random.default_rng(cfg.seed + 7).choice(
            len(eligible), size=min(cfg.probe_size, len(eligible)), replace=False)
        probe = eligible[pick]

    def draw(rng):
        return eligible[rng.integers(len(eligible))]

    try:
        _run_training(agent, draw, cfg, probe, log)
    except TransportError:
        if checkpoint_path is not None:
            PolicySnapshot.of(agent).save(checkpoint_path)
        raise
    return PolicySnapshot.of(agent), log


def _eligible_rows(rows: np.ndarray, handle, goal: GoalSpec) -> np.ndarray:
    """Rows on which an episode can start (targeted goals exclude rows
    already predicted as the target class)."""
    if goal.mode != "targeted":
        return rows
    preds = handle.predict_batch(rows)
    keep = rows[preds != goal.target_class]
    if len(keep) == 0:
        raise ConfigError("every training row is already predicted as the target class")
    return keep


def fine_tune_local(snapshot: PolicySnapshot, x_target: np.ndarray, handle,
                    budget_fraction: float = 0.25, radius: float = 1.0,
                    target_draw_prob: float = 0.25,
                    train_config: TrainConfig | None = None) -> tuple[PolicySnapshot, list]:
    """Continue training from a global snapshot with episodes starting on
    the target instance and on uniform ball samples around it. The
    interaction budget is a fraction of the global run's total steps."""
    base = train_config or snapshot.train_config
    total = int(budget_fraction * base.total_steps)
    epochs = total // base.per_sample_budget
    if epochs == 0:
        return snapshot, []
    cfg = replace(base, epochs=epochs, eps_start=min(base.eps_start, 0.2),
                  probe_every=max(1, epochs))
    agent = snapshot.build_agent(handle, train_config=cfg)
    x_target = np.asarray(x_target, dtype=float)
    log: list = []

    def draw(rng):
        if rng.uniform() < target_draw_prob:
            return x_target
        return sample_neighborhood(x_target, radius, 1, rng)[0]

    _run_training(agent, draw, cfg, probe=x_target[None, :], log=log)
    return PolicySnapshot.of(agent), log


def generate_cf(snapshot: PolicySnapshot, x: np.ndarray, handle,
                instance_id: str = "") -> CfResult:
    """Greedy counterfactual rollout from a frozen snapshot."""
    agent = snapshot.build_agent(handle)
    return agent.explain(x, instance_id=instance_id, stats=snapshot.stats)
