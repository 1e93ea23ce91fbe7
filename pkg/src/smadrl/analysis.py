"""Post-hoc metrics: workload inequality, congestion, strategy signatures.

Everything here is a pure function over immutable traces or workload
vectors; nothing touches the environment.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .traces import ArenaInfo, Trace, TraceStep

DEFAULT_CLOG_WINDOW = 200  # steps without a traversal before a jam is declared


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative (agent share, pellet share) points, workload sorted ascending."""

    points: tuple[tuple[float, float], ...]
    degenerate: bool = False


@dataclass(frozen=True)
class ClogEvent:
    start: int
    duration: int


@dataclass
class EpisodeMetrics:
    episode: int
    total_pellets: int
    workload: list[int]
    gini: float
    collisions: int
    clog_events: int
    oat_fraction: float
    bb_fraction: float
    tunnel_occupancy_histogram: dict[int, int] = field(default_factory=dict)


def lorenz_points(workload) -> LorenzCurve:
    """Lorenz curve of a per-agent workload vector.

    An all-zero workload yields the degenerate identity-x, zero-y curve.
    """
    w = np.asarray(workload, dtype=float)
    if w.size == 0:
        raise ValueError("workload must contain at least one agent")
    if np.any(w < 0):
        raise ValueError("workload entries must be nonnegative")
    n = w.size
    xs = np.arange(n + 1) / n
    total = w.sum()
    if total == 0:
        return LorenzCurve(points=tuple((float(x), 0.0) for x in xs), degenerate=True)
    ys = np.concatenate([[0.0], np.cumsum(np.sort(w)) / total])
    return LorenzCurve(points=tuple((float(x), float(y)) for x, y in zip(xs, ys)))


def gini(workload) -> float:
    """Mean absolute difference Gini: sum_ij |x_i - x_j| / (2 n^2 mean)."""
    w = np.asarray(workload, dtype=float)
    if w.size == 0:
        raise ValueError("workload must contain at least one agent")
    total = w.sum()
    if total <= 0:
        raise ValueError("gini requires a positive workload total")
    diffs = np.abs(w[:, None] - w[None, :]).sum()
    return float(diffs / (2 * w.size**2 * w.mean()))


def _tunnel_flow(steps: list[TraceStep], arena: ArenaInfo):
    """Walk one episode and annotate each step with tunnel flow facts.

    Yields, per step index t >= 0, a dict with: occupancy at t,
    traversal count (agents leaving at the opposite end from where they
    entered), and laden-homeward / unladen-sourceward move flags for the
    t-1 -> t transition.
    """
    index = {c: i for i, c in enumerate(arena.tunnel_cells)}
    entry_side: dict[int, str] = {}
    prev: TraceStep | None = None
    for t, rec in enumerate(steps):
        occupancy = sum(1 for p in rec.positions if p in index)
        traversals = 0
        laden_homeward = False
        unladen_sourceward = False
        prev_occupancy = 0
        if prev is not None:
            prev_occupancy = sum(1 for p in prev.positions if p in index)
            for a, (p0, p1) in enumerate(zip(prev.positions, rec.positions)):
                was_in, now_in = p0 in index, p1 in index
                if not was_in and now_in:
                    entry_side[a] = "home" if p0 == arena.home_portal else "source"
                elif was_in and not now_in:
                    exit_side = "home" if p1 == arena.home_portal else "source"
                    if entry_side.get(a) is not None and exit_side != entry_side[a]:
                        traversals += 1
                    entry_side.pop(a, None)
                if was_in and p0 != p1:
                    # Homeward = toward the tunnel's home end (or out of it).
                    toward_home = (now_in and index[p1] < index[p0]) or p1 == arena.home_portal
                    toward_source = (now_in and index[p1] > index[p0]) or p1 == arena.source_portal
                    if rec.laden[a] and toward_home:
                        laden_homeward = True
                    if not rec.laden[a] and toward_source:
                        unladen_sourceward = True
        yield {
            "occupancy": occupancy,
            "prev_occupancy": prev_occupancy,
            "traversals": traversals,
            "laden_homeward": laden_homeward,
            "unladen_sourceward": unladen_sourceward,
        }
        prev = rec


def detect_clogs(
    steps: list[TraceStep], arena: ArenaInfo, window: int = DEFAULT_CLOG_WINDOW
) -> list[ClogEvent]:
    """Find sustained jams in one episode's steps.

    A jam opens once the tunnel has held >= 2 agents for `window`
    consecutive steps with no completed traversal; it closes on the next
    traversal, on the occupancy dropping below 2, or at trace end.
    """
    events: list[ClogEvent] = []
    blocked_run = 0
    open_start: int | None = None
    t = -1
    for t, flow in enumerate(_tunnel_flow(steps, arena)):
        if open_start is not None:
            if flow["traversals"] > 0 or flow["occupancy"] < 2:
                events.append(ClogEvent(start=open_start, duration=t - open_start))
                open_start = None
                blocked_run = 0
            continue
        if flow["occupancy"] >= 2 and flow["traversals"] == 0:
            blocked_run += 1
            if blocked_run >= window:
                open_start = t
        else:
            blocked_run = 0
    if open_start is not None:
        events.append(ClogEvent(start=open_start, duration=t - open_start))
    return events


def classify_strategy(steps: list[TraceStep], arena: ArenaInfo) -> tuple[float, float]:
    """(one-at-a-time fraction, bucket-brigade fraction) for one episode.

    OAT: share of steps with tunnel occupancy <= 2. BB: share of
    tunnel-active steps (tunnel occupied at the previous step) whose
    transition moved a laden agent homeward and an unladen agent
    sourceward inside the tunnel.
    """
    total = 0
    oat = 0
    active = 0
    bb = 0
    for flow in _tunnel_flow(steps, arena):
        total += 1
        if flow["occupancy"] <= 2:
            oat += 1
        if flow["prev_occupancy"] >= 1:
            active += 1
            if flow["laden_homeward"] and flow["unladen_sourceward"]:
                bb += 1
    if total == 0:
        return 0.0, 0.0
    return oat / total, (bb / active if active else 0.0)


def occupancy_histogram(steps: list[TraceStep], arena: ArenaInfo) -> dict[int, int]:
    tunnel = set(arena.tunnel_cells)
    hist: dict[int, int] = {}
    for rec in steps:
        occ = sum(1 for p in rec.positions if p in tunnel)
        hist[occ] = hist.get(occ, 0) + 1
    return hist


def episode_metrics(
    episode: int,
    steps: list[TraceStep],
    arena: ArenaInfo,
    num_agents: int,
    delivered: list[int],
    collisions: int,
    clog_window: int = DEFAULT_CLOG_WINDOW,
) -> EpisodeMetrics:
    """Bundle the per-episode analysis outputs for a finished episode."""
    total = int(sum(delivered))
    oat_fraction, bb_fraction = classify_strategy(steps, arena)
    return EpisodeMetrics(
        episode=episode,
        total_pellets=total,
        workload=[int(d) for d in delivered],
        gini=gini(delivered) if total > 0 else 0.0,
        collisions=int(collisions),
        clog_events=len(detect_clogs(steps, arena, clog_window)),
        oat_fraction=oat_fraction,
        bb_fraction=bb_fraction,
        tunnel_occupancy_histogram=occupancy_histogram(steps, arena),
    )


def metrics_from_trace(trace: Trace, clog_window: int = DEFAULT_CLOG_WINDOW) -> list[EpisodeMetrics]:
    """Recompute per-episode metrics from a stored trace.

    Deliveries are recovered from mode transitions: an agent completes a
    trip on the step its mode leaves Dumping with its laden flag cleared.
    """
    from .env import AgentMode  # local import to keep analysis free of env deps elsewhere

    out = []
    for steps in trace.episodes():
        if not steps:
            continue
        n = len(steps[0].positions)
        delivered = [0] * n
        collisions = 0
        prev = None
        for rec in steps:
            for a in range(n):
                if (
                    prev is not None
                    and prev.modes[a] == AgentMode.DUMPING
                    and rec.modes[a] == AgentMode.EXIT_HOME
                ):
                    delivered[a] += 1
                if rec.modes[a] == AgentMode.COLLISION:
                    collisions += 1
            prev = rec
        out.append(
            episode_metrics(
                episode=steps[0].episode,
                steps=steps,
                arena=trace.arena,
                num_agents=n,
                delivered=delivered,
                collisions=collisions,
                clog_window=clog_window,
            )
        )
    return out


def write_reports(
    metrics: list[EpisodeMetrics],
    num_agents: int,
    csv_path: str | Path,
    lorenz_path: str | Path | None = None,
) -> None:
    """Per-episode metrics CSV plus a Lorenz/Gini report keyed by team size."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = [
            "episode",
            "total_pellets",
            "gini",
            "collisions",
            "clog_events",
            "oat_fraction",
            "bb_fraction",
        ] + [f"pellets_{i}" for i in range(num_agents)]
        writer.writerow(header)
        for m in metrics:
            writer.writerow(
                [
                    m.episode,
                    m.total_pellets,
                    repr(m.gini),
                    m.collisions,
                    m.clog_events,
                    repr(m.oat_fraction),
                    repr(m.bb_fraction),
                ]
                + [m.workload[i] if i < len(m.workload) else "" for i in range(num_agents)]
            )
    if lorenz_path is None:
        return
    aggregate = np.zeros(num_agents)
    for m in metrics:
        aggregate[: len(m.workload)] += m.workload
    curve = lorenz_points(aggregate)
    report = {
        str(num_agents): {
            "episodes": len(metrics),
            "workload": [int(v) for v in aggregate],
            "gini": gini(aggregate) if aggregate.sum() > 0 else 0.0,
            "degenerate": curve.degenerate,
            "points": [[x, y] for x, y in curve.points],
        }
    }
    with open(lorenz_path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_metrics_csv(path: str | Path) -> list[EpisodeMetrics]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            workload = [
                int(v)
                for k, v in sorted(
                    ((k, v) for k, v in row.items() if k.startswith("pellets_")),
                    key=lambda kv: int(kv[0].split("_")[1]),
                )
                if v != ""
            ]
            out.append(
                EpisodeMetrics(
                    episode=int(row["episode"]),
                    total_pellets=int(row["total_pellets"]),
                    workload=workload,
                    gini=float(row["gini"]),
                    collisions=int(row["collisions"]),
                    clog_events=int(row["clog_events"]),
                    oat_fraction=float(row["oat_fraction"]),
                    bb_fraction=float(row["bb_fraction"]),
                )
            )
        return out
