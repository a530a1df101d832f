"""Proximal policy optimization with a small numpy actor-critic.

The network is a shared tanh MLP trunk feeding a policy head (one logit per
action) and a scalar value head. Gradients are written out by hand and
checked against finite differences in the test suite.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import generators as gen
from .circuit import Circuit, SynthesisResult, verify_solves
from .gf2core import BitMatrix, is_identity
from .rlenv import CnotEnv, RewardSpec, Schedule, action_gate, curriculum_source, default_max_steps

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CNOTPPO\n"
CHECKPOINT_VERSION = 1
PARAM_ORDER = ("W1", "b1", "W2", "b2", "Wp", "bp", "Wv", "bv")


@dataclass(frozen=True)
class PpoConfig:
    clip_ratio: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    epochs_per_update: int = 10
    rollout_horizon: int = 2048
    minibatch: int = 64
    value_coeff: float = 0.5
    entropy_coeff: float = 0.01
    grad_clip: float = 0.5
    adam_eps: float = 1e-5
    n_envs: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.clip_ratio < 1:
            raise ValueError("clip_ratio must be in (0, 1)")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must be in (0, 1]")
        if self.rollout_horizon % self.n_envs:
            raise ValueError("rollout_horizon must be a multiple of n_envs")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


# -- network -------------------------------------------------------------


@dataclass
class PolicyParams:
    """Weights of the actor-critic; ``W*`` are (fan_in, fan_out)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    Wp: np.ndarray
    bp: np.ndarray
    Wv: np.ndarray
    bv: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        return (self.W1.shape[0], self.W1.shape[1], self.W2.shape[1], self.Wp.shape[1])

    @property
    def m(self) -> int:
        m = int(round(self.W1.shape[0] ** 0.5))
        if m * m != self.W1.shape[0] or m * (m - 1) != self.Wp.shape[1]:
            raise ValueError("layer sizes do not correspond to an m x m environment")
        return m

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, k) for k in PARAM_ORDER]

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "PolicyParams":
        out, pos = [], 0
        for a in self.arrays():
            out.append(np.asarray(vec[pos:pos + a.size], dtype=np.float64).reshape(a.shape))
            pos += a.size
        if pos != vec.size:
            raise ValueError("flat parameter vector has the wrong length")
        return PolicyParams(*out)

    def snap_float32(self) -> "PolicyParams":
        """Round to float32-representable values (what a checkpoint stores)."""
        return PolicyParams(*(a.astype(np.float32).astype(np.float64) for a in self.arrays()))


def _orthogonal(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(fan_in, fan_out), min(fan_in, fan_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if fan_in < fan_out:
        q = q.T
    return gain * q[:fan_in, :fan_out]


def init_params(obs_size: int, n_actions: int, hidden: Sequence[int] = (128, 128),
                seed: int = 0) -> PolicyParams:
    """Orthogonal init: gain sqrt(2) in the trunk, 0.01 on the policy head, 1 on the value head."""
    h1, h2 = hidden
    rng = np.random.default_rng(seed)
    g = np.sqrt(2.0)
    return PolicyParams(
        _orthogonal(rng, obs_size, h1, g), np.zeros(h1),
        _orthogonal(rng, h1, h2, g), np.zeros(h2),
        _orthogonal(rng, h2, n_actions, 0.01), np.zeros(n_actions),
        _orthogonal(rng, h2, 1, 1.0), np.zeros(1),
    )


def zero_params(obs_size: int, n_actions: int, hidden: Sequence[int] = (128, 128)) -> PolicyParams:
    h1, h2 = hidden
    z = np.zeros
    return PolicyParams(z((obs_size, h1)), z(h1), z((h1, h2)), z(h2),
                        z((h2, n_actions)), z(n_actions), z((h2, 1)), z(1))


def policy_forward(params: PolicyParams, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Logits and values for one observation (1-D) or a batch (2-D)."""
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.W1.shape[0]:
        raise ValueError(f"observation size {x.shape[1]} != network input {params.W1.shape[0]}")
    h1 = np.tanh(x @ params.W1 + params.b1)
    h2 = np.tanh(h1 @ params.W2 + params.b2)
    logits = h2 @ params.Wp + params.bp
    values = (h2 @ params.Wv + params.bv)[:, 0]
    return (logits[0], values[0]) if single else (logits, values)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


# -- advantages ----------------------------------------------------------


def compute_gae(rewards, values, dones, gamma: float, lam: float, last_value=0.0):
    """Generalized advantage estimates and returns.

    ``rewards``, ``values``, ``dones`` have shape (T,) or (T, E); ``dones[t]``
    marks that the episode ended at step t, and ``last_value`` bootstraps
    the step after T - 1.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_value = np.broadcast_to(np.asarray(last_value, dtype=np.float64), rewards.shape[1:])
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(T)):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


# -- loss and gradients --------------------------------------------------


@dataclass
class TrajectoryBatch:
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __post_init__(self):
        n = len(self.actions)
        for name in ("observations", "log_probs", "rewards", "values", "dones", "advantages", "returns"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.actions)


def ppo_loss_and_grad(params: PolicyParams, obs: np.ndarray, actions: np.ndarray,
                      old_log_probs: np.ndarray, advantages: np.ndarray, returns: np.ndarray,
                      cfg: PpoConfig, need_grad: bool = True):
    """Total PPO loss on a minibatch, its metrics, and (optionally) the gradient."""
    B = len(actions)
    idx = np.arange(B)
    h1 = np.tanh(obs @ params.W1 + params.b1)
    h2 = np.tanh(h1 @ params.W2 + params.b2)
    logits = h2 @ params.Wp + params.bp
    values = (h2 @ params.Wv + params.bv)[:, 0]

    logp = log_softmax(logits)
    p = np.exp(logp)
    lp_a = logp[idx, actions]
    ratio = np.exp(lp_a - old_log_probs)
    eps = cfg.clip_ratio
    clipped = np.clip(ratio, 1 - eps, 1 + eps)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    value_loss = np.mean((values - returns) ** 2)
    ent = -(p * logp).sum(axis=1)
    entropy = ent.mean()
    loss = policy_loss + cfg.value_coeff * value_loss - cfg.entropy_coeff * entropy

    metrics = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean(old_log_probs - lp_a)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1) > eps)),
    }
    if not need_grad:
        return loss, metrics, None

    # d loss / d log pi(a): the min picks surr1 unless surr2 is strictly smaller,
    # and surr2 only carries gradient while the ratio is inside the clip band
    inside = (ratio >= 1 - eps) & (ratio <= 1 + eps)
    through = (surr1 <= surr2) | inside
    g_lp = np.where(through, -advantages * ratio / B, 0.0)

    g_logits = -p * g_lp[:, None]
    g_logits[idx, actions] += g_lp
    g_logits += (cfg.entropy_coeff / B) * p * (logp + ent[:, None])
    g_values = cfg.value_coeff * 2.0 * (values - returns) / B

    gWp = h2.T @ g_logits
    gbp = g_logits.sum(axis=0)
    gWv = h2.T @ g_values[:, None]
    gbv = np.array([g_values.sum()])
    g_h2 = g_logits @ params.Wp.T + g_values[:, None] @ params.Wv.T
    g_z2 = g_h2 * (1 - h2 ** 2)
    gW2 = h1.T @ g_z2
    gb2 = g_z2.sum(axis=0)
    g_z1 = (g_z2 @ params.W2.T) * (1 - h1 ** 2)
    gW1 = obs.T @ g_z1
    gb1 = g_z1.sum(axis=0)
    grad = PolicyParams(gW1, gb1, gW2, gb2, gWp, gbp, gWv, gbv)
    return loss, metrics, grad


class NonFiniteLoss(FloatingPointError):
    pass


class Adam:
    def __init__(self, params: PolicyParams, lr: float, eps: float = 1e-8,
                 betas: tuple[float, float] = (0.9, 0.999)):
        self.lr, self.eps = lr, eps
        self.b1, self.b2 = betas
        self.t = 0
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]

    def step(self, params: PolicyParams, grad: PolicyParams) -> PolicyParams:
        self.t += 1
        out = []
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, (w, g) in enumerate(zip(params.arrays(), grad.arrays())):
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            out.append(w - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps))
        return PolicyParams(*out)


def clip_grad_norm(grad: PolicyParams, max_norm: float) -> tuple[PolicyParams, float]:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grad.arrays())))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        grad = PolicyParams(*(g * scale for g in grad.arrays()))
    return grad, norm


def ppo_update(params: PolicyParams, batch: TrajectoryBatch, cfg: PpoConfig,
               rng: np.random.Generator, optimizer: Optional[Adam] = None):
    """Several epochs of minibatch clipped-surrogate steps on one batch.

    Returns the new params and the metrics of the last minibatch, averaged
    per epoch into ``history``.
    """
    if len(batch) == 0:
        raise ValueError("empty trajectory batch")
    optimizer = optimizer or Adam(params, cfg.learning_rate, cfg.adam_eps)
    adv = batch.advantages
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    n = len(batch)
    history = []
    for epoch in range(cfg.epochs_per_update):
        order = rng.permutation(n)
        epoch_metrics = []
        for start in range(0, n, cfg.minibatch):
            mb = order[start:start + cfg.minibatch]
            loss, metrics, grad = ppo_loss_and_grad(
                params, batch.observations[mb], batch.actions[mb], batch.log_probs[mb],
                adv[mb], batch.returns[mb], cfg)
            if not np.isfinite(loss) or not all(np.isfinite(g).all() for g in grad.arrays()):
                raise NonFiniteLoss(f"non-finite loss/gradient at epoch {epoch}: {metrics}")
            grad, norm = clip_grad_norm(grad, cfg.grad_clip)
            metrics["grad_norm"] = norm
            params = optimizer.step(params, grad)
            epoch_metrics.append(metrics)
        history.append({k: float(np.mean([mm[k] for mm in epoch_metrics])) for k in epoch_metrics[0]})
    return params, {"epochs": history, **history[-1]}


# -- sampling ------------------------------------------------------------


def sample_actions(logits: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF sampling with uniforms ``u``; returns actions and their log-probs."""
    logp = log_softmax(logits)
    cdf = np.cumsum(np.exp(logp), axis=1)
    acts = np.array([min(int(np.searchsorted(row, x * row[-1], side="right")), len(row) - 1)
                     for row, x in zip(cdf, u)])
    return acts, logp[np.arange(len(acts)), acts]


# -- checkpoints ---------------------------------------------------------


def save_checkpoint(params: PolicyParams, path, cfg: Optional[PpoConfig] = None,
                    extra: Optional[dict] = None) -> None:
    """Versioned JSON header line followed by little-endian float32 arrays in PARAM_ORDER."""
    header = {
        "version": CHECKPOINT_VERSION,
        "m": params.m,
        "layer_sizes": list(params.sizes),
        "activation": "tanh",
        "param_order": list(PARAM_ORDER),
        "shapes": [list(a.shape) for a in params.arrays()],
        "config": asdict(cfg) if cfg else None,
        "cfg_hash": cfg.digest() if cfg else None,
        **(extra or {}),
    }
    body = b"".join(a.astype("<f4").tobytes() for a in params.arrays())
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(body)


def load_checkpoint(path) -> tuple[PolicyParams, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a policy checkpoint")
        header = json.loads(fh.readline())
        body = fh.read()
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64)
    arrays, pos = [], 0
    for shape in header["shapes"]:
        size = int(np.prod(shape))
        if pos + size > flat.size:
            raise ValueError(f"{path}: truncated checkpoint")
        arrays.append(flat[pos:pos + size].reshape(shape).copy())
        pos += size
    if pos != flat.size:
        raise ValueError(f"{path}: trailing data in checkpoint")
    return PolicyParams(*arrays), header


# -- training ------------------------------------------------------------


@dataclass
class PhaseStats:
    episodes: int = 0
    solved: int = 0
    total_length: int = 0

    def as_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "solve_rate": self.solved / self.episodes if self.episodes else 0.0,
            "mean_length": self.total_length / self.episodes if self.episodes else 0.0,
        }


@dataclass
class TrainResult:
    params: PolicyParams
    log: list = field(default_factory=list)
    phase_stats: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def train(m: int, schedule: Schedule, cfg: PpoConfig = PpoConfig(),
          hidden: Sequence[int] = (128, 128), max_steps: Optional[int] = None,
          spec: RewardSpec = RewardSpec(), out_dir=None,
          progress: Optional[Callable[[dict], None]] = None,
          env_factory: Optional[Callable[[int, np.random.Generator], CnotEnv]] = None) -> TrainResult:
    """Train a policy on m x m matrices following the curriculum ``schedule``.

    Episodes are numbered globally in the order environments reset, and each
    one draws its start matrix from the schedule's class for that number.
    Training stops after the update in which episode ``schedule.total``
    finished. With ``out_dir`` a checkpoint is written after every update
    that crosses a phase boundary (and at the end).
    """
    root = np.random.SeedSequence(cfg.seed)
    init_seed, sample_seed, env_seed = root.spawn(3)
    params = init_params(m * m, m * (m - 1), hidden, seed=int(init_seed.generate_state(1)[0]))
    rng = np.random.default_rng(sample_seed)
    env_rng = np.random.default_rng(env_seed)
    optimizer = Adam(params, cfg.learning_rate, cfg.adam_eps)
    max_steps = default_max_steps(m) if max_steps is None else max_steps

    make_env = env_factory or (lambda m_, r: CnotEnv(m_, rng=r, max_steps=max_steps, spec=spec))
    envs = [make_env(m, env_rng) for _ in range(cfg.n_envs)]
    result = TrainResult(params)
    result.phase_stats = [PhaseStats() for _ in schedule.phases]
    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    next_episode = 0
    episode_of = [0] * cfg.n_envs
    finished = 0

    def start_episode(k: int) -> np.ndarray:
        nonlocal next_episode
        ep = min(next_episode, schedule.total - 1)
        cls = curriculum_source(ep, schedule, m)
        mat = gen.sample(cls, m, env_rng)
        while is_identity(mat):
            mat = gen.sample(cls, m, env_rng)
        episode_of[k] = ep
        next_episode += 1
        return envs[k].reset(mat)

    obs = np.stack([start_episode(k) for k in range(cfg.n_envs)])
    steps_per_env = cfg.rollout_horizon // cfg.n_envs
    E, D = cfg.n_envs, m * m
    boundaries = schedule.boundaries()
    next_boundary = 0
    update = 0
    t_start = time.perf_counter()

    while finished < schedule.total:
        buf_obs = np.zeros((steps_per_env, E, D))
        buf_act = np.zeros((steps_per_env, E), dtype=np.int64)
        buf_lp = np.zeros((steps_per_env, E))
        buf_rew = np.zeros((steps_per_env, E))
        buf_val = np.zeros((steps_per_env, E))
        buf_done = np.zeros((steps_per_env, E))
        for t in range(steps_per_env):
            logits, values = policy_forward(params, obs)
            acts, lps = sample_actions(logits, rng.random(E))
            buf_obs[t], buf_act[t], buf_lp[t], buf_val[t] = obs, acts, lps, values
            for k, env in enumerate(envs):
                o, r, done, info = env.step(int(acts[k]))
                if done:
                    if info["truncated"]:
                        # bootstrap through time-limit truncation
                        _, v_term = policy_forward(params, o)
                        r += cfg.gamma * float(v_term)
                    stats = result.phase_stats[schedule.phase_index(episode_of[k])]
                    stats.episodes += 1
                    stats.solved += int(info["solved"])
                    stats.total_length += env.steps_taken
                    finished += 1
                    o = start_episode(k)
                buf_rew[t, k] = r
                buf_done[t, k] = float(done)
                obs[k] = o
        _, last_values = policy_forward(params, obs)
        adv, ret = compute_gae(buf_rew, buf_val, buf_done, cfg.gamma, cfg.gae_lambda, last_values)
        batch = TrajectoryBatch(
            buf_obs.reshape(-1, D), buf_act.reshape(-1), buf_lp.reshape(-1), buf_rew.reshape(-1),
            buf_val.reshape(-1), buf_done.reshape(-1), adv.reshape(-1), ret.reshape(-1))
        params, metrics = ppo_update(params, batch, cfg, rng, optimizer)
        update += 1
        entry = {
            "update": update,
            "episodes_finished": finished,
            "phase": schedule.phase_index(min(next_episode, schedule.total) - 1),
            "elapsed": time.perf_counter() - t_start,
            **{k: v for k, v in metrics.items() if k != "epochs"},
        }
        result.log.append(entry)
        if progress:
            progress(entry)

        crossed = False
        while next_boundary < len(boundaries) and finished >= boundaries[next_boundary]:
            next_boundary += 1
            crossed = True
        if crossed and out_dir:
            # snap so the in-memory policy equals what a reload produces
            params = params.snap_float32()
            path = out_dir / f"policy_ep{finished:07d}.ckpt"
            save_checkpoint(params, path, cfg, {"episodes": finished})
            result.checkpoints.append(str(path))
            log.info("checkpoint %s", path)

    result.params = params.snap_float32() if out_dir else params
    if out_dir:
        final = out_dir / "policy_final.ckpt"
        save_checkpoint(result.params, final, cfg, {"episodes": finished})
        result.checkpoints.append(str(final))
    return result


# -- evaluation ----------------------------------------------------------


def run_rngs(seed: int, runs: int) -> list[np.random.Generator]:
    """One generator per run; run i's stream does not depend on ``runs``."""
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in root.spawn(runs)]


def rollout_runs(params: PolicyParams, matrix: BitMatrix, runs: int, max_steps: Optional[int] = None,
                 seed: int = 0) -> list[Optional[Circuit]]:
    """Sample ``runs`` stochastic episodes from ``matrix``; solving runs yield their circuit."""
    m = matrix.n
    if params.m != m:
        raise ValueError(f"policy is for m={params.m}, matrix is {m}x{m}")
    max_steps = default_max_steps(m) if max_steps is None else max_steps
    if is_identity(matrix):
        return [Circuit(m, ()) for _ in range(runs)]
    rngs = run_rngs(seed, runs)
    envs = [CnotEnv(m, max_steps=max_steps) for _ in range(runs)]
    obs = np.stack([env.reset(matrix) for env in envs])
    gates: list[list] = [[] for _ in range(runs)]
    outcome: list[Optional[Circuit]] = [None] * runs
    active = list(range(runs))
    while active:
        logits, _ = policy_forward(params, obs[active])
        u = np.array([rngs[k].random() for k in active])
        acts, _ = sample_actions(logits, u)
        still = []
        for k, a in zip(active, acts):
            o, _, done, info = envs[k].step(int(a))
            gates[k].append(action_gate(int(a), m))
            obs[k] = o
            if done:
                if info["solved"]:
                    outcome[k] = Circuit(m, tuple(gates[k]))
            else:
                still.append(k)
        active = still
    return outcome


def evaluate_best_of(params: PolicyParams, matrix: BitMatrix, runs: int = 100,
                     max_steps: Optional[int] = None, seed: int = 0) -> SynthesisResult:
    """Shortest solving circuit over ``runs`` sampled episodes.

    Ties go to the earliest run. When no run solves the matrix the result
    has ``verified=False`` and an empty circuit.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    t0 = time.perf_counter()
    outcomes = rollout_runs(params, matrix, runs, max_steps, seed)
    best = None
    for circ in outcomes:
        if circ is not None and (best is None or len(circ) < len(best)):
            best = circ
    elapsed = time.perf_counter() - t0
    solved = sum(c is not None for c in outcomes)
    if best is None:
        return SynthesisResult(Circuit(matrix.n, ()), "rl", False, elapsed,
                               {"solved_runs": 0, "runs": runs})
    if not verify_solves(matrix, best):  # pragma: no cover - the env only reports real solves
        raise AssertionError("policy circuit does not solve the matrix")
    return SynthesisResult(best, "rl", True, elapsed, {"solved_runs": solved, "runs": runs})
