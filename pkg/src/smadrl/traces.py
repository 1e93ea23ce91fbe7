"""Per-step rollout traces and their newline-delimited JSON form.

A trace holds one record per environment step (post-move state of every
agent). Arena facts the offline analysis needs (ordered tunnel cells
and the two portal cells where the corridor meets the chambers) ride in
a separate metadata sidecar so the NDJSON file has exactly one line per
step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .layout import Coord, GridLayout


@dataclass
class TraceStep:
    episode: int
    step: int
    positions: list[Coord]
    modes: list[int]
    laden: list[int]
    actions: list[int]
    rewards: list[float]

    def to_record(self) -> dict:
        return {
            "episode": self.episode,
            "step": self.step,
            "agents": [
                {
                    "pos": [int(p[0]), int(p[1])],
                    "mode": int(m),
                    "laden": int(l),
                    "action": int(a),
                    "reward": float(r),
                }
                for p, m, l, a, r in zip(
                    self.positions, self.modes, self.laden, self.actions, self.rewards
                )
            ],
        }

    @classmethod
    def from_record(cls, record: dict) -> "TraceStep":
        agents = record["agents"]
        return cls(
            episode=int(record["episode"]),
            step=int(record["step"]),
            positions=[(int(a["pos"][0]), int(a["pos"][1])) for a in agents],
            modes=[int(a["mode"]) for a in agents],
            laden=[int(a["laden"]) for a in agents],
            actions=[int(a["action"]) for a in agents],
            rewards=[float(a["reward"]) for a in agents],
        )


@dataclass(frozen=True)
class ArenaInfo:
    """Geometry facts required to interpret a trace offline."""

    tunnel_cells: tuple[Coord, ...]  # ordered home end -> source end
    home_portal: Coord  # chamber cell adjoining the home end of the tunnel
    source_portal: Coord

    @property
    def tunnel_length(self) -> int:
        return len(self.tunnel_cells)

    @classmethod
    def from_layout(cls, layout: GridLayout) -> "ArenaInfo":
        first, last = layout.tunnel_cells[0], layout.tunnel_cells[-1]
        tunnel = set(layout.tunnel_cells)

        def portal(end: Coord, away_from: Coord) -> Coord:
            options = [
                nb
                for nb in ((end[0] - 1, end[1]), (end[0] + 1, end[1]), (end[0], end[1] - 1), (end[0], end[1] + 1))
                if not layout.is_wall(nb) and nb not in tunnel and nb != away_from
            ]
            return options[0]

        if len(layout.tunnel_cells) == 1:
            # Single-cell tunnel: its two open neighbours are the portals.
            x, y = first
            open_nb = [
                nb
                for nb in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1))
                if not layout.is_wall(nb)
            ]
            home_portal, source_portal = open_nb[0], open_nb[1]
        else:
            home_portal = portal(first, layout.tunnel_cells[1])
            source_portal = portal(last, layout.tunnel_cells[-2])
        return cls(
            tunnel_cells=tuple(layout.tunnel_cells),
            home_portal=home_portal,
            source_portal=source_portal,
        )

    def to_dict(self) -> dict:
        return {
            "tunnel_cells": [[x, y] for x, y in self.tunnel_cells],
            "home_portal": list(self.home_portal),
            "source_portal": list(self.source_portal),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArenaInfo":
        return cls(
            tunnel_cells=tuple((int(x), int(y)) for x, y in data["tunnel_cells"]),
            home_portal=(int(data["home_portal"][0]), int(data["home_portal"][1])),
            source_portal=(int(data["source_portal"][0]), int(data["source_portal"][1])),
        )


@dataclass
class Trace:
    arena: ArenaInfo
    steps: list[TraceStep] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def episodes(self) -> list[list[TraceStep]]:
        """Split into per-episode runs, preserving step order."""
        runs: dict[int, list[TraceStep]] = {}
        for s in self.steps:
            runs.setdefault(s.episode, []).append(s)
        return [runs[e] for e in sorted(runs)]


def meta_path_for(trace_path: str | Path) -> Path:
    return Path(str(trace_path) + ".meta.json")


def write_trace(trace: Trace, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        for step in trace.steps:
            fh.write(json.dumps(step.to_record(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
    meta = {"arena": trace.arena.to_dict(), **trace.meta}
    with open(meta_path_for(path), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    meta_file = meta_path_for(path)
    if not meta_file.exists():
        raise FileNotFoundError(f"trace metadata sidecar not found: {meta_file}")
    with open(meta_file) as fh:
        meta = json.load(fh)
    arena = ArenaInfo.from_dict(meta.pop("arena"))
    steps = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                steps.append(TraceStep.from_record(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"malformed trace record at line {line_no}: {exc}") from exc
    return Trace(arena=arena, steps=steps, meta=meta)
