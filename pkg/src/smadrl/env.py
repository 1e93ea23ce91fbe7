"""Seeded multi-agent excavation environment.

Agents shuttle pellets from the source chamber through a one-cell-wide
tunnel back to the home chamber. All agents move simultaneously;
movement conflicts are resolved deterministically from the episode
seed, and shaped rewards combine distance progress, collision
penalties, and pickup/delivery events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError
from .layout import CellKind, Coord, GridLayout, distance_field, validate_layout
from .pheromone import PheromoneMap, PheromoneParams, tunnel_density


class Action(IntEnum):
    NORTH = 0
    SOUTH = 1
    WEST = 2
    EAST = 3
    STOP = 4


ACTION_DELTAS: dict[int, tuple[int, int]] = {
    Action.NORTH: (0, -1),
    Action.SOUTH: (0, 1),
    Action.WEST: (-1, 0),
    Action.EAST: (1, 0),
    Action.STOP: (0, 0),
}

NUM_ACTIONS = len(Action)


class AgentMode(IntEnum):
    GOING_TO_DIG = 0
    DIGGING = 1
    EXIT_DIGGING = 2
    GOING_HOME = 3
    DUMPING = 4
    EXIT_HOME = 5
    COLLISION = 6


class MoveOutcome(IntEnum):
    MOVED = 0
    COLLIDED = 1
    STAYED = 2


class RewardMode(IntEnum):
    LOCAL = 0
    GLOBAL = 1


@dataclass(frozen=True)
class RewardConfig:
    r_distance: float = 2.5
    r_collision: float = -2.0
    r_pickup: float = 50.0
    r_trip: float = 50.0
    w_distance: float = 0.2
    w_collision: float = 0.2
    w_pickup: float = 0.2
    w_trip: float = 0.4
    mode: RewardMode = RewardMode.LOCAL

    def __post_init__(self):
        if min(self.w_distance, self.w_collision, self.w_pickup, self.w_trip) <= 0:
            raise ConfigError("reward weights must all be positive")


@dataclass
class AgentState:
    id: int
    position: Coord
    orientation: int = Action.NORTH  # last successful movement direction
    mode: AgentMode = AgentMode.GOING_TO_DIG
    resume_mode: AgentMode = AgentMode.GOING_TO_DIG
    laden: bool = False
    collision_count: int = 0
    prev_action: int = Action.STOP
    dig_timer: int = 0


@dataclass
class AgentEvents:
    picked_up: bool = False
    delivered: bool = False
    collided: bool = False


@dataclass
class StepResult:
    observations: list[np.ndarray]
    rewards: np.ndarray
    events: list[AgentEvents]
    done: bool
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EnvConfig:
    layout: GridLayout
    num_agents: int
    episode_length: int = 5000
    seed: int = 0
    reward: RewardConfig = RewardConfig()
    pheromone: PheromoneParams = PheromoneParams()
    observation_radius: int = 1
    stigmergy_enabled: bool = True
    dig_duration: int = 1

    def __post_init__(self):
        if self.num_agents < 1:
            raise ConfigError("num_agents must be >= 1")
        if self.num_agents > len(self.layout.home_cells):
            raise ConfigError(
                f"cannot place {self.num_agents} agents on {len(self.layout.home_cells)} home cells"
            )
        if self.episode_length < 1:
            raise ConfigError("episode_length must be >= 1")
        if self.observation_radius < 1:
            raise ConfigError("observation_radius must be >= 1")
        if self.dig_duration < 1:
            raise ConfigError("dig_duration must be >= 1")


COLLISION_COUNT_CAP = 100  # observation normalization bound for the collision counter


def observation_dim(observation_radius: int) -> int:
    fov = (2 * observation_radius + 1) ** 2 - 1
    return 8 + 3 * fov + 1


def resolve_moves(
    positions: list[Coord],
    targets: list[Coord],
    blocked,
    rng: np.random.Generator,
) -> tuple[list[MoveOutcome], list[Coord]]:
    """Resolve simultaneous movement intents to per-agent outcomes.

    Rules, applied in order:
      * a target equal to the agent's own cell (Stop) is Stayed;
      * a target into a wall is Collided;
      * two agents swapping cells are both Collided;
      * of several agents contesting one target, the earliest in this
        step's random permutation survives, the rest are Collided;
      * chains (an agent following another that vacates) resolve
        iteratively to a fixpoint; cycles left over at the fixpoint are
        all Collided.

    The result always preserves one-agent-per-cell.
    """
    n = len(positions)
    perm = [int(a) for a in rng.permutation(n)]
    outcome: list[MoveOutcome | None] = [None] * n
    new_positions = list(positions)

    for i in range(n):
        if targets[i] == positions[i]:
            outcome[i] = MoveOutcome.STAYED
        elif blocked(targets[i]):
            outcome[i] = MoveOutcome.COLLIDED

    origin = {positions[i]: i for i in range(n)}

    # Swaps: both movers bounce.
    for i in range(n):
        if outcome[i] is not None:
            continue
        j = origin.get(targets[i])
        if j is not None and j != i and outcome[j] is None and targets[j] == positions[i]:
            outcome[i] = MoveOutcome.COLLIDED
            outcome[j] = MoveOutcome.COLLIDED

    # Contested targets: permutation-first wins, the rest bounce.
    rank = {agent: k for k, agent in enumerate(perm)}
    groups: dict[Coord, list[int]] = {}
    for i in range(n):
        if outcome[i] is None:
            groups.setdefault(targets[i], []).append(i)
    for contenders in groups.values():
        if len(contenders) > 1:
            contenders.sort(key=rank.__getitem__)
            for loser in contenders[1:]:
                outcome[loser] = MoveOutcome.COLLIDED

    # Chains: follow until the head cell frees up or proves blocked.
    pending = [i for i in range(n) if outcome[i] is None]
    changed = True
    while changed and pending:
        changed = False
        still_pending = []
        for i in pending:
            holder = origin.get(targets[i])
            if holder is None or outcome[holder] == MoveOutcome.MOVED:
                outcome[i] = MoveOutcome.MOVED
                new_positions[i] = targets[i]
                changed = True
            elif outcome[holder] in (MoveOutcome.COLLIDED, MoveOutcome.STAYED):
                outcome[i] = MoveOutcome.COLLIDED
                changed = True
            else:
                still_pending.append(i)
        pending = still_pending
    for i in pending:  # unresolved movement cycles
        outcome[i] = MoveOutcome.COLLIDED

    return [MoveOutcome(o) for o in outcome], new_positions


def update_agent_mode(
    agent: AgentState, outcome: MoveOutcome, layout: GridLayout, dig_duration: int
) -> AgentEvents:
    """Advance one agent's task FSM after its move resolved.

    A Collided outcome overlays the Collision mode (freezing task
    progress for the step); a later successful move or Stop restores the
    stored resume mode before the normal transitions apply.
    """
    events = AgentEvents()
    if outcome == MoveOutcome.COLLIDED:
        agent.collision_count += 1
        if agent.mode != AgentMode.COLLISION:
            agent.resume_mode = agent.mode
        agent.mode = AgentMode.COLLISION
        events.collided = True
        return events

    if agent.mode == AgentMode.COLLISION:
        agent.mode = agent.resume_mode

    kind = layout.kind_at(agent.position)
    mode = agent.mode
    if mode == AgentMode.GOING_TO_DIG:
        if kind == CellKind.SOURCE:
            agent.mode = AgentMode.DIGGING
            agent.dig_timer = 0
    elif mode == AgentMode.DIGGING:
        if kind != CellKind.SOURCE:
            agent.mode = AgentMode.GOING_TO_DIG  # wandered off before securing a pellet
            agent.dig_timer = 0
        else:
            agent.dig_timer += 1
            if agent.dig_timer >= dig_duration:
                agent.laden = True
                agent.mode = AgentMode.EXIT_DIGGING
                agent.dig_timer = 0
                events.picked_up = True
    elif mode == AgentMode.EXIT_DIGGING:
        if kind != CellKind.SOURCE:
            agent.mode = AgentMode.GOING_HOME
    elif mode == AgentMode.GOING_HOME:
        if kind == CellKind.HOME:
            agent.mode = AgentMode.DUMPING
            agent.dig_timer = 0
    elif mode == AgentMode.DUMPING:
        if kind != CellKind.HOME:
            agent.mode = AgentMode.GOING_HOME
            agent.dig_timer = 0
        else:
            agent.dig_timer += 1
            if agent.dig_timer >= 1:  # dumping takes one step
                agent.laden = False
                agent.mode = AgentMode.EXIT_HOME
                agent.dig_timer = 0
                events.delivered = True
    elif mode == AgentMode.EXIT_HOME:
        if kind != CellKind.HOME:
            agent.mode = AgentMode.GOING_TO_DIG
    return events


def compute_rewards(
    events: list[AgentEvents],
    distance_deltas: list[float],
    laden: list[bool],
    config: RewardConfig,
    num_agents: int,
) -> np.ndarray:
    """Weighted four-component reward per agent.

    Global mode grants every agent the value of every pickup/trip event
    fired this step; distance and collision components stay individual.
    """
    total_pickups = sum(ev.picked_up for ev in events)
    total_trips = sum(ev.delivered for ev in events)
    rewards = np.zeros(num_agents)
    for i in range(num_agents):
        rd = config.r_distance if distance_deltas[i] > 0 else 0.0
        rc = config.r_collision if (events[i].collided and not laden[i]) else 0.0
        if config.mode == RewardMode.GLOBAL:
            rp = config.r_pickup * total_pickups
            rs = config.r_trip * total_trips
        else:
            rp = config.r_pickup if events[i].picked_up else 0.0
            rs = config.r_trip if events[i].delivered else 0.0
        rewards[i] = (
            config.w_distance * rd
            + config.w_collision * rc
            + config.w_pickup * rp
            + config.w_trip * rs
        )
    return rewards


class ExcavationEnv:
    """Step/reset environment over a fixed arena and team size."""

    def __init__(self, config: EnvConfig):
        validate_layout(config.layout)
        self.config = config
        self.layout = config.layout
        self.num_agents = config.num_agents
        self.obs_dim = observation_dim(config.observation_radius)
        self.dist_home = distance_field(self.layout, self.layout.home_cells)
        self.dist_source = distance_field(self.layout, self.layout.source_cells)
        self._dmax_home = float(np.max(self.dist_home[np.isfinite(self.dist_home)]))
        self._dmax_source = float(np.max(self.dist_source[np.isfinite(self.dist_source)]))
        self.pheromone = PheromoneMap(self.layout, config.pheromone)
        self.agents: list[AgentState] = []
        self.rng = np.random.default_rng(config.seed)
        self.step_index = 0
        self.done = True

    def reset(self, seed: int | None = None) -> StepResult:
        """Place agents on the first home cells (id order) and zero all state."""
        self.rng = np.random.default_rng(self.config.seed if seed is None else seed)
        self.agents = [
            AgentState(id=i, position=self.layout.home_cells[i]) for i in range(self.num_agents)
        ]
        self.pheromone.clear()
        self.step_index = 0
        self.done = False
        observations = [self._observation(agent) for agent in self.agents]
        return StepResult(
            observations=observations,
            rewards=np.zeros(self.num_agents),
            events=[AgentEvents() for _ in range(self.num_agents)],
            done=False,
            info={"tunnel_occupancy": self._tunnel_occupancy(), "step_index": 0},
        )

    def step(self, actions: list[int]) -> StepResult:
        if self.done:
            raise ConfigError("cannot step a finished episode; call reset first")
        if len(actions) != self.num_agents:
            raise ConfigError(f"expected {self.num_agents} actions, got {len(actions)}")

        prev_laden = [agent.laden for agent in self.agents]
        prev_goal_dist = [self._goal_distance(agent, agent.laden) for agent in self.agents]

        positions = [agent.position for agent in self.agents]
        targets = []
        for agent, action in zip(self.agents, actions):
            dx, dy = ACTION_DELTAS[int(action)]
            targets.append((agent.position[0] + dx, agent.position[1] + dy))
        outcomes, new_positions = resolve_moves(positions, targets, self.layout.is_wall, self.rng)

        events = []
        for agent, action, outcome, pos in zip(self.agents, actions, outcomes, new_positions):
            agent.position = pos
            if outcome == MoveOutcome.MOVED:
                agent.orientation = int(action)
            agent.prev_action = int(action)
            events.append(update_agent_mode(agent, outcome, self.layout, self.config.dig_duration))

        if self.config.stigmergy_enabled:
            for agent in self.agents:
                self.pheromone.deposit(
                    agent.position,
                    laden=int(agent.laden),
                    action=agent.prev_action,
                    mode=int(agent.mode),
                    step=self.step_index,
                )
            self.pheromone.decay_all([agent.position for agent in self.agents])

        deltas = [
            prev_goal_dist[i] - self._goal_distance(self.agents[i], prev_laden[i])
            for i in range(self.num_agents)
        ]
        rewards = compute_rewards(events, deltas, prev_laden, self.config.reward, self.num_agents)

        self.step_index += 1
        self.done = self.step_index >= self.config.episode_length
        observations = [self._observation(agent) for agent in self.agents]
        return StepResult(
            observations=observations,
            rewards=rewards,
            events=events,
            done=self.done,
            info={"tunnel_occupancy": self._tunnel_occupancy(), "step_index": self.step_index},
        )

    def _goal_distance(self, agent: AgentState, laden: bool) -> float:
        fld = self.dist_home if laden else self.dist_source
        x, y = agent.position
        return float(fld[y, x])

    def _tunnel_occupancy(self) -> int:
        tunnel = set(self.layout.tunnel_cells)
        return sum(1 for agent in self.agents if agent.position in tunnel)

    def _observation(self, agent: AgentState) -> np.ndarray:
        obs = np.zeros(self.obs_dim)
        x, y = agent.position
        obs[0] = int(agent.mode) / 6.0
        obs[1] = x / self.layout.width
        obs[2] = y / self.layout.height
        obs[3] = int(agent.orientation) / 3.0
        obs[4] = int(agent.prev_action) / 4.0
        obs[5] = min(agent.collision_count, COLLISION_COUNT_CAP) / COLLISION_COUNT_CAP
        obs[6] = self.dist_home[y, x] / self._dmax_home
        obs[7] = self.dist_source[y, x] / self._dmax_source
        if self.config.stigmergy_enabled:
            triples = self.pheromone.read_fov(agent.position, self.config.observation_radius)
            obs[8 : 8 + 3 * len(triples)] = np.asarray(triples).ravel()
            obs[-1] = tunnel_density(self.layout, [a.position for a in self.agents])
        return obs
