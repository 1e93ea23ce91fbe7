"""Binary checkpoint format for training state.

Layout: a 16-byte magic header, a little-endian uint64 manifest length,
a canonical JSON manifest (config snapshot, counters, RNG states, blob
directory), then little-endian float32 blobs in declared order. The
round trip is bit-exact, including optimizer moments and replay
contents, so a resumed run continues the exact trajectory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"SMADRL-CHKPT-01\n"
FORMAT_VERSION = 1


@dataclass
class AgentCheckpoint:
    agent_id: int
    online: list[tuple[np.ndarray, np.ndarray]]
    target: list[tuple[np.ndarray, np.ndarray]]
    adam_m: list[tuple[np.ndarray, np.ndarray]]
    adam_v: list[tuple[np.ndarray, np.ndarray]]
    adam_t: int
    rng_state: dict
    learn_steps: int
    updates: int
    schedule_horizon: int
    buffer_obs: np.ndarray
    buffer_actions: np.ndarray
    buffer_rewards: np.ndarray
    buffer_next_obs: np.ndarray
    buffer_dones: np.ndarray
    buffer_pos: int
    buffer_size: int


@dataclass
class CheckpointState:
    config: dict
    seed: int
    episodes_done: int
    agents: list[AgentCheckpoint]


def _agent_blobs(agent: AgentCheckpoint) -> list[tuple[str, np.ndarray]]:
    blobs: list[tuple[str, np.ndarray]] = []
    prefix = f"a{agent.agent_id}"
    for group, params in (
        ("online", agent.online),
        ("target", agent.target),
        ("adam_m", agent.adam_m),
        ("adam_v", agent.adam_v),
    ):
        for layer, (w, b) in enumerate(params):
            blobs.append((f"{prefix}/{group}/{layer}/w", w))
            blobs.append((f"{prefix}/{group}/{layer}/b", b))
    blobs.append((f"{prefix}/buffer/obs", agent.buffer_obs))
    blobs.append((f"{prefix}/buffer/actions", agent.buffer_actions.astype(np.float32)))
    blobs.append((f"{prefix}/buffer/rewards", agent.buffer_rewards))
    blobs.append((f"{prefix}/buffer/next_obs", agent.buffer_next_obs))
    blobs.append((f"{prefix}/buffer/dones", agent.buffer_dones.astype(np.float32)))
    return blobs


def save_checkpoint(path: str | Path, state: CheckpointState) -> None:
    blobs: list[tuple[str, np.ndarray]] = []
    for agent in state.agents:
        blobs.extend(_agent_blobs(agent))

    directory = []
    offset = 0
    payload = bytearray()
    for name, arr in blobs:
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        payload.extend(data)
        offset += len(data)

    manifest = {
        "format_version": FORMAT_VERSION,
        "config": state.config,
        "seed": state.seed,
        "episodes_done": state.episodes_done,
        "agents": [
            {
                "id": a.agent_id,
                "adam_t": a.adam_t,
                "rng_state": a.rng_state,
                "learn_steps": a.learn_steps,
                "updates": a.updates,
                "schedule_horizon": a.schedule_horizon,
                "buffer_pos": a.buffer_pos,
                "buffer_size": a.buffer_size,
                "layers": [list(w.shape) for w, _ in a.online],
            }
            for a in state.agents
        ],
        "blobs": directory,
    }
    manifest_bytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest_bytes)))
        fh.write(manifest_bytes)
        fh.write(bytes(payload))


def load_checkpoint(path: str | Path) -> CheckpointState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8:
        raise CheckpointError(f"checkpoint truncated: {path}")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    (manifest_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    manifest_start = len(MAGIC) + 8
    if len(raw) < manifest_start + manifest_len:
        raise CheckpointError(f"checkpoint truncated: {path}")
    try:
        manifest = json.loads(raw[manifest_start : manifest_start + manifest_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint manifest in {path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {manifest.get('format_version')} in {path}"
        )
    blob_start = manifest_start + manifest_len
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["blobs"]:
        begin = blob_start + entry["offset"]
        end = begin + entry["nbytes"]
        if end > len(raw):
            raise CheckpointError(f"checkpoint truncated: {path}")
        arrays[entry["name"]] = np.frombuffer(raw[begin:end], dtype="<f4").reshape(entry["shape"]).copy()

    agents = []
    for meta in manifest["agents"]:
        i = meta["id"]
        prefix = f"a{i}"

        def stack(group: str) -> list[tuple[np.ndarray, np.ndarray]]:
            return [
                (arrays[f"{prefix}/{group}/{layer}/w"], arrays[f"{prefix}/{group}/{layer}/b"])
                for layer in range(len(meta["layers"]))
            ]

        agents.append(
            AgentCheckpoint(
                agent_id=i,
                online=stack("online"),
                target=stack("target"),
                adam_m=stack("adam_m"),
                adam_v=stack("adam_v"),
                adam_t=meta["adam_t"],
                rng_state=meta["rng_state"],
                learn_steps=meta["learn_steps"],
                updates=meta["updates"],
                schedule_horizon=meta["schedule_horizon"],
                buffer_obs=arrays[f"{prefix}/buffer/obs"],
                buffer_actions=arrays[f"{prefix}/buffer/actions"].astype(np.int64),
                buffer_rewards=arrays[f"{prefix}/buffer/rewards"],
                buffer_next_obs=arrays[f"{prefix}/buffer/next_obs"],
                buffer_dones=arrays[f"{prefix}/buffer/dones"].astype(bool),
                buffer_pos=meta["buffer_pos"],
                buffer_size=meta["buffer_size"],
            )
        )
    return CheckpointState(
        config=manifest["config"],
        seed=manifest["seed"],
        episodes_done=manifest["episodes_done"],
        agents=agents,
    )
