"""Peer collaboration for offline clients: head exchange and joint updates.

Offline clients trade only head blocks with geographic neighbors. Each client
computes its sequence embedding once, scores every candidate head (its own
included) on a sampled batch of local data, and caches the winner as the
anchor for subsequent local updates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import Dims, ParamSet, apply_fc, fc_inject, lstm_hidden, mse_loss
from .training import train_local


@dataclass
class CollabCache:
    """Best collaborative model found in the latest peer exchange."""

    model: ParamSet
    source_id: int
    loss: float


def evaluate_candidates(
    own_model: ParamSet,
    own_id: int,
    neighbor_heads: list[tuple[int, np.ndarray]],
    eval_inputs: np.ndarray,
    eval_targets: np.ndarray,
) -> CollabCache:
    """Pick the head minimizing loss on the client's sampled data.

    The embedding is computed once with the client's own recurrent block and
    reused for every candidate, so all losses come from the same forward pass.
    Ties keep the client's own head, then the lowest neighbor id.
    """
    dims = own_model.dims
    hidden = lstm_hidden(own_model, eval_inputs)
    best_source = own_id
    best_head = own_model.fc_block
    best_loss = mse_loss(apply_fc(own_model.fc_block, hidden, dims), eval_targets)
    for nid, head in sorted(neighbor_heads, key=lambda kv: kv[0]):
        loss = mse_loss(apply_fc(head, hidden, dims), eval_targets)
        if loss < best_loss:
            best_source, best_head, best_loss = nid, head, loss
    return CollabCache(
        model=fc_inject(own_model, best_head), source_id=best_source, loss=best_loss
    )


def collaborative_local_update(
    model: ParamSet,
    cache: CollabCache | None,
    inputs: np.ndarray,
    targets: np.ndarray,
    epochs: int,
    eta: float,
    batch_size: int,
    rng: np.random.Generator,
) -> ParamSet:
    """Local SGD pulled toward the cached collaborative model, if any.

    Without a cache this is a plain local update: the divergence penalty only
    exists once a peer exchange has happened.
    """
    anchor = cache.model if cache is not None else None
    return train_local(
        model, inputs, targets, epochs, eta, batch_size, rng, kl_anchor=anchor
    )


def head_payload_values(n_neighbors: int, dims) -> int:
    """Values received in one exchange: one head block per neighbor."""
    return n_neighbors * dims.fc_size


def serialize_fc_head(fc_block: np.ndarray, dims: Dims) -> str:
    """Wire format for a head block: a dims header plus the ordered values.

    The in-process exchange never serializes, but a networked deployment can
    adopt this format as-is; floats survive the round trip exactly.
    """
    if fc_block.shape != (dims.fc_size,):
        raise ConfigError(f"head has {fc_block.size} values, dims say {dims.fc_size}")
    return json.dumps(
        {"hidden": dims.n_hidden, "outputs": dims.n_out, "values": fc_block.tolist()}
    )


def parse_fc_head(payload: str) -> tuple[np.ndarray, int, int]:
    """Inverse of :func:`serialize_fc_head`; returns (values, hidden, outputs)."""
    try:
        raw = json.loads(payload)
        hidden = int(raw["hidden"])
        outputs = int(raw["outputs"])
        values = np.asarray(raw["values"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed head payload: {exc}") from exc
    if values.shape != (hidden * outputs + outputs,):
        raise ConfigError(
            f"head payload has {values.size} values, header says "
            f"{hidden * outputs + outputs}"
        )
    return values, hidden, outputs
