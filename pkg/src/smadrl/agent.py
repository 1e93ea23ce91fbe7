"""Independent deep-Q learner: replay, double-Q targets, epsilon-greedy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network
from .network import MLPParams


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from start to end over the horizon, constant after."""

    start: float = 1.0
    end: float = 0.02
    horizon: int = 0

    def value(self, step: int) -> float:
        if self.horizon <= 0 or step >= self.horizon:
            return self.end
        return self.start + (self.end - self.start) * (step / self.horizon)


@dataclass(frozen=True)
class LearnerConfig:
    learning_rate: float = 1e-4
    gamma: float = 0.99
    batch_size: int = 64
    buffer_capacity: int = 100_000
    target_sync_interval: int = 1000
    learn_start: int = 1000
    update_interval: int = 1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.02
    epsilon_fraction: float = 0.10
    hidden_sizes: tuple[int, ...] = network.HIDDEN_SIZES


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, obs_dim: int, dtype=np.float32):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=dtype)
        self.dones = np.zeros(capacity, dtype=bool)
        self.pos = 0
        self.size = 0

    def push(self, obs, action: int, reward: float, next_obs, done: bool) -> None:
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.dones[idx],
        )

    def __len__(self) -> int:
        return self.size


def act(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy pick; greedy ties break toward the lowest index."""
    if rng.random() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


def td_targets(
    rewards: np.ndarray,
    next_obs: np.ndarray,
    dones: np.ndarray,
    online: MLPParams,
    target: MLPParams,
    gamma: float,
) -> np.ndarray:
    """Double-Q targets: online net selects the next action, target net scores it."""
    q_online = network.forward(online, next_obs)
    best = np.argmax(q_online, axis=1)
    q_target = network.forward(target, next_obs)
    bootstrap = q_target[np.arange(len(best)), best]
    return rewards + gamma * bootstrap * (~np.asarray(dones, dtype=bool))


class DQNAgent:
    """One agent's learner state: nets, optimizer, replay, exploration."""

    def __init__(
        self,
        obs_dim: int,
        config: LearnerConfig,
        rng: np.random.Generator,
        total_training_steps: int,
        num_actions: int = 5,
        dtype=np.float32,
    ):
        self.config = config
        self.rng = rng
        self.online = network.init_params(rng, obs_dim, config.hidden_sizes, num_actions, dtype)
        self.target = network.clone_params(self.online)
        self.adam = network.init_adam(self.online, config.learning_rate)
        self.buffer = ReplayBuffer(config.buffer_capacity, obs_dim, dtype)
        self.schedule = EpsilonSchedule(
            start=config.epsilon_start,
            end=config.epsilon_end,
            horizon=int(round(config.epsilon_fraction * total_training_steps)),
        )
        self.dtype = dtype
        self.learning = True
        self.learn_steps = 0  # environment steps taken while learning; drives epsilon
        self.updates = 0

    @property
    def epsilon(self) -> float:
        return self.schedule.value(self.learn_steps) if self.learning else 0.0

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        return network.forward(self.online, np.asarray(obs, dtype=self.dtype))

    def select_action(self, obs: np.ndarray) -> int:
        return act(self.q_values(obs), self.epsilon, self.rng)

    def observe(self, obs, action: int, reward: float, next_obs, done: bool) -> float | None:
        """Store a transition and run one update once warm. No-op when frozen."""
        if not self.learning:
            return None
        self.buffer.push(obs, action, reward, next_obs, done)
        self.learn_steps += 1
        if (
            self.buffer.size >= self.config.learn_start
            and self.learn_steps % self.config.update_interval == 0
        ):
            return self.update()
        return None

    def update(self) -> float:
        obs, actions, rewards, next_obs, dones = self.buffer.sample(
            self.rng, self.config.batch_size
        )
        targets = td_targets(rewards, next_obs, dones, self.online, self.target, self.config.gamma)
        loss, grads = network.loss_and_grads(self.online, obs, actions, targets)
        network.adam_update(self.online, self.adam, grads)
        self.updates += 1
        if self.updates % self.config.target_sync_interval == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target = network.clone_params(self.online)
