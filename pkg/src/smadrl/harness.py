"""Experiment orchestration: method variants, curriculum, train/eval loops.

One experiment is a single sequential loop over (environment + N
learners), fully determined by its config document and seed. The
curriculum variant grows the environment population phase by phase:
two concurrent learners first, then one fresh learner at a time while
the elders act greedily with frozen parameters.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import DQNAgent, EpsilonSchedule
from .analysis import DEFAULT_CLOG_WINDOW, EpisodeMetrics, detect_clogs, episode_metrics
from .checkpoint import AgentCheckpoint, CheckpointState
from .config import ConfigDocument, build_env_config, build_learner_config, parse_config
from .env import ExcavationEnv, observation_dim
from .errors import ConfigError, DivergenceError
from .traces import ArenaInfo, Trace, TraceStep

# Seed-stream tags so env episodes, agent init, and evaluation draw from
# disjoint deterministic streams of the master seed.
_STREAM_TRAIN_ENV = 0
_STREAM_AGENT = 1
_STREAM_EVAL_ENV = 2
_STREAM_EVAL_AGENT = 3


def _derived_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0])


def _make_rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


@dataclass(frozen=True)
class Phase:
    population: int
    learners: tuple[int, ...]
    episodes: int


def build_phases(doc: ConfigDocument) -> list[Phase]:
    n = doc.env.num_agents
    if not doc.curriculum_enabled:
        return [Phase(population=n, learners=tuple(range(n)), episodes=doc.run.episodes)]
    budget = doc.curriculum.phase_episodes
    if n == 1:
        return [Phase(population=1, learners=(0,), episodes=budget)]
    phases = [Phase(population=2, learners=(0, 1), episodes=budget)]
    for k in range(3, n + 1):
        phases.append(Phase(population=k, learners=(k - 1,), episodes=budget))
    return phases


def total_episodes(doc: ConfigDocument) -> int:
    return sum(p.episodes for p in build_phases(doc))


def _learning_steps_for(agent_id: int, phases: list[Phase], steps_per_episode: int) -> int:
    return sum(p.episodes for p in phases if agent_id in p.learners) * steps_per_episode


@dataclass
class EpisodeRecord:
    episode: int
    phase: int
    population: int
    rewards: list[float]
    pellets: list[int]
    total_pellets: int
    collisions: int
    clog_events: int
    wall_clock: float


@dataclass
class TrainLog:
    num_agents: int
    records: list[EpisodeRecord] = field(default_factory=list)

    def total_pellets(self) -> int:
        return sum(r.total_pellets for r in self.records)


@dataclass
class TrainResult:
    state: CheckpointState
    log: TrainLog
    traces: list[list[TraceStep]] | None = None
    arena: ArenaInfo | None = None


def _run_episode(
    env: ExcavationEnv,
    agents: list[DQNAgent],
    learner_ids: set[int],
    env_seed: int,
    episode_index: int,
):
    """One full episode; returns (steps, per-agent reward, per-agent pellets, collisions)."""
    n = env.num_agents
    result = env.reset(env_seed)
    obs = result.observations
    episode_reward = np.zeros(n)
    pellets = [0] * n
    collisions = 0
    steps: list[TraceStep] = []
    for _ in range(env.config.episode_length):
        actions = [agents[i].select_action(obs[i]) for i in range(n)]
        result = env.step(actions)
        for i in learner_ids:
            agents[i].observe(obs[i], actions[i], result.rewards[i], result.observations[i], result.done)
        episode_reward += result.rewards
        for i, ev in enumerate(result.events):
            pellets[i] += int(ev.delivered)
            collisions += int(ev.collided)
        steps.append(
            TraceStep(
                episode=episode_index,
                step=result.info["step_index"],
                positions=[a.position for a in env.agents],
                modes=[int(a.mode) for a in env.agents],
                laden=[int(a.laden) for a in env.agents],
                actions=[int(a) for a in actions],
                rewards=[float(r) for r in result.rewards],
            )
        )
        obs = result.observations
    return steps, episode_reward, pellets, collisions


def _snapshot_agent(agent: DQNAgent, agent_id: int) -> AgentCheckpoint:
    clone = lambda params: [(w.copy(), b.copy()) for w, b in params]
    buf = agent.buffer
    return AgentCheckpoint(
        agent_id=agent_id,
        online=clone(agent.online),
        target=clone(agent.target),
        adam_m=clone(agent.adam.m),
        adam_v=clone(agent.adam.v),
        adam_t=agent.adam.t,
        rng_state=agent.rng.bit_generator.state,
        learn_steps=agent.learn_steps,
        updates=agent.updates,
        schedule_horizon=agent.schedule.horizon,
        buffer_obs=buf.obs[: buf.size].copy(),
        buffer_actions=buf.actions[: buf.size].copy(),
        buffer_rewards=buf.rewards[: buf.size].copy(),
        buffer_next_obs=buf.next_obs[: buf.size].copy(),
        buffer_dones=buf.dones[: buf.size].copy(),
        buffer_pos=buf.pos,
        buffer_size=buf.size,
    )


def snapshot_state(doc: ConfigDocument, seed: int, episodes_done: int, agents: list[DQNAgent]) -> CheckpointState:
    return CheckpointState(
        config=doc.canonical_dict(),
        seed=seed,
        episodes_done=episodes_done,
        agents=[_snapshot_agent(a, i) for i, a in enumerate(agents)],
    )


def _build_agents(doc: ConfigDocument, seed: int) -> list[DQNAgent]:
    phases = build_phases(doc)
    learner_cfg = build_learner_config(doc)
    obs_dim = observation_dim(doc.env.observation_radius)
    agents = []
    for i in range(doc.env.num_agents):
        rng = _make_rng(seed, _STREAM_AGENT, i)
        agents.append(
            DQNAgent(
                obs_dim,
                learner_cfg,
                rng,
                total_training_steps=_learning_steps_for(i, phases, doc.env.episode_length),
            )
        )
    return agents


def restore_agents(state: CheckpointState, doc: ConfigDocument) -> list[DQNAgent]:
    """Rebuild live agents bit-exactly from a checkpoint."""
    learner_cfg = build_learner_config(doc)
    obs_dim = observation_dim(doc.env.observation_radius)
    agents = []
    for saved in state.agents:
        agent = DQNAgent(obs_dim, learner_cfg, _make_rng(0), total_training_steps=0)
        agent.online = [(w.copy(), b.copy()) for w, b in saved.online]
        agent.target = [(w.copy(), b.copy()) for w, b in saved.target]
        agent.adam.m = [(w.copy(), b.copy()) for w, b in saved.adam_m]
        agent.adam.v = [(w.copy(), b.copy()) for w, b in saved.adam_v]
        agent.adam.t = saved.adam_t
        agent.rng.bit_generator.state = saved.rng_state
        agent.learn_steps = saved.learn_steps
        agent.updates = saved.updates
        agent.schedule = EpsilonSchedule(
            start=learner_cfg.epsilon_start,
            end=learner_cfg.epsilon_end,
            horizon=saved.schedule_horizon,
        )
        buf = agent.buffer
        size = saved.buffer_size
        buf.obs[:size] = saved.buffer_obs
        buf.actions[:size] = saved.buffer_actions
        buf.rewards[:size] = saved.buffer_rewards
        buf.next_obs[:size] = saved.buffer_next_obs
        buf.dones[:size] = saved.buffer_dones
        buf.pos = saved.buffer_pos
        buf.size = size
        agents.append(agent)
    return agents


def run_training(
    doc: ConfigDocument,
    seed: int,
    resume_from: CheckpointState | None = None,
    stop_after_episodes: int | None = None,
    keep_traces: bool = False,
    clog_window: int = DEFAULT_CLOG_WINDOW,
) -> TrainResult:
    """Train all agents of one experiment under one seed.

    A run checkpointed at any episode boundary and resumed continues the
    exact trajectory. On divergence a DivergenceError is raised with a
    diagnostic CheckpointState and the partial log attached.
    """
    phases = build_phases(doc)
    if resume_from is not None:
        if resume_from.config != doc.canonical_dict():
            raise ConfigError("checkpoint config does not match the requested experiment")
        agents = restore_agents(resume_from, doc)
        start_episode = resume_from.episodes_done
    else:
        agents = _build_agents(doc, seed)
        start_episode = 0
    stop = total_episodes(doc) if stop_after_episodes is None else stop_after_episodes

    log = TrainLog(num_agents=doc.env.num_agents)
    traces: list[list[TraceStep]] = []
    arena: ArenaInfo | None = None

    episode = start_episode
    first_of_phase = 0
    try:
        for phase_idx, phase in enumerate(phases):
            phase_end = first_of_phase + phase.episodes
            if episode >= phase_end:
                first_of_phase = phase_end
                continue
            if episode >= stop:
                break
            env_cfg = build_env_config(doc, num_agents=phase.population, seed=seed)
            env = ExcavationEnv(env_cfg)
            arena = ArenaInfo.from_layout(env.layout)
            for i, agent in enumerate(agents):
                agent.learning = i in phase.learners
            while episode < phase_end and episode < stop:
                started = time.perf_counter()
                env_seed = _derived_seed(seed, _STREAM_TRAIN_ENV, episode)
                steps, rewards, pellets, collisions = _run_episode(
                    env, agents[: phase.population], set(phase.learners), env_seed, episode
                )
                record = EpisodeRecord(
                    episode=episode,
                    phase=phase_idx,
                    population=phase.population,
                    rewards=[float(r) for r in rewards],
                    pellets=pellets,
                    total_pellets=int(sum(pellets)),
                    collisions=collisions,
                    clog_events=len(detect_clogs(steps, arena, clog_window)),
                    wall_clock=time.perf_counter() - started,
                )
                log.records.append(record)
                if keep_traces:
                    traces.append(steps)
                episode += 1
            first_of_phase = phase_end
    except DivergenceError as exc:
        exc.state = snapshot_state(doc, seed, episode, agents)  # type: ignore[attr-defined]
        exc.log = log  # type: ignore[attr-defined]
        raise

    state = snapshot_state(doc, seed, episode, agents)
    return TrainResult(state=state, log=log, traces=traces if keep_traces else None, arena=arena)


def evaluate(
    state: CheckpointState,
    episodes: int,
    seed: int,
    collect_trace: bool = False,
    clog_window: int = DEFAULT_CLOG_WINDOW,
) -> tuple[list[EpisodeMetrics], Trace | None]:
    """Greedy rollouts of a trained team; per-episode metrics and optional trace."""
    doc = parse_config(state.config)
    if len(state.agents) != doc.env.num_agents:
        raise ConfigError(
            f"checkpoint holds {len(state.agents)} agents but the config declares {doc.env.num_agents}"
        )
    agents = restore_agents(state, doc)
    for i, agent in enumerate(agents):
        agent.learning = False
        agent.rng = _make_rng(seed, _STREAM_EVAL_AGENT, i)
    env = ExcavationEnv(build_env_config(doc, seed=seed))
    arena = ArenaInfo.from_layout(env.layout)
    metrics: list[EpisodeMetrics] = []
    all_steps: list[TraceStep] = []
    for ep in range(episodes):
        env_seed = _derived_seed(seed, _STREAM_EVAL_ENV, ep)
        steps, _, pellets, collisions = _run_episode(env, agents, set(), env_seed, ep)
        metrics.append(
            episode_metrics(
                episode=ep,
                steps=steps,
                arena=arena,
                num_agents=env.num_agents,
                delivered=pellets,
                collisions=collisions,
                clog_window=clog_window,
            )
        )
        if collect_trace:
            all_steps.extend(steps)
    trace = None
    if collect_trace:
        trace = Trace(
            arena=arena,
            steps=all_steps,
            meta={
                "episodes": episodes,
                "steps_per_episode": doc.env.episode_length,
                "num_agents": doc.env.num_agents,
                "method": doc.method,
                "seed": seed,
            },
        )
    return metrics, trace


def random_policy_metrics(
    doc: ConfigDocument, episodes: int, seed: int, clog_window: int = DEFAULT_CLOG_WINDOW
) -> list[EpisodeMetrics]:
    """Uniform-random baseline rollouts (used to floor trained performance)."""
    env = ExcavationEnv(build_env_config(doc, seed=seed))
    arena = ArenaInfo.from_layout(env.layout)
    rng = _make_rng(seed, _STREAM_EVAL_AGENT, 10_000)
    metrics = []
    for ep in range(episodes):
        result = env.reset(_derived_seed(seed, _STREAM_EVAL_ENV, ep))
        pellets = [0] * env.num_agents
        collisions = 0
        steps: list[TraceStep] = []
        for _ in range(env.config.episode_length):
            actions = [int(rng.integers(5)) for _ in range(env.num_agents)]
            result = env.step(actions)
            for i, ev in enumerate(result.events):
                pellets[i] += int(ev.delivered)
                collisions += int(ev.collided)
            steps.append(
                TraceStep(
                    episode=ep,
                    step=result.info["step_index"],
                    positions=[a.position for a in env.agents],
                    modes=[int(a.mode) for a in env.agents],
                    laden=[int(a.laden) for a in env.agents],
                    actions=actions,
                    rewards=[float(r) for r in result.rewards],
                )
            )
        metrics.append(
            episode_metrics(ep, steps, arena, env.num_agents, pellets, collisions, clog_window)
        )
    return metrics


def write_train_log(log: TrainLog, csv_path: str | Path, run_meta: dict | None = None) -> None:
    """TrainLog CSV (deterministic) plus a sidecar holding wall-clock data."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        n = log.num_agents
        writer.writerow(
            ["episode"]
            + [f"reward_{i}" for i in range(n)]
            + [f"pellets_{i}" for i in range(n)]
            + ["total_pellets", "collisions", "clog_events"]
        )
        for r in log.records:
            rewards = [repr(r.rewards[i]) if i < len(r.rewards) else "" for i in range(n)]
            pellets = [r.pellets[i] if i < len(r.pellets) else "" for i in range(n)]
            writer.writerow(
                [r.episode] + rewards + pellets + [r.total_pellets, r.collisions, r.clog_events]
            )
    sidecar = {
        "wall_clock": [r.wall_clock for r in log.records],
        "phase": [r.phase for r in log.records],
        "population": [r.population for r in log.records],
        "written_at": time.time(),
    }
    if run_meta:
        sidecar.update(run_meta)
    with open(Path(str(csv_path) + ".meta.json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_train_log_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
