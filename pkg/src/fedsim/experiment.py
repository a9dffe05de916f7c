"""The experiment engine: data preparation, the round loop, and evaluation.

One engine runs every algorithm variant; variants only toggle the selection
mode, the peer-collaboration rounds, and the proximal penalty. All
randomness flows from per-purpose generators spawned off the config seed, one
set per client, so results are independent of evaluation order and identical
across repeated runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .availability import (
    AvailabilityPlan,
    RevealState,
    WeakArea,
    assign_by_datasize,
    assign_random,
    assign_regional,
    datasize_threshold,
    reveal_round,
)
from .collab import CollabCache, collaborative_local_update, evaluate_candidates, head_payload_values
from .config import ExperimentConfig
from .connectivity import (
    LinkState,
    build_neighbor_graph,
    charge_upload,
    mark_all_online,
    participation,
    step_connectivity,
)
from .data import (
    BBox,
    make_windows,
    parse_csv,
    parse_tdrive,
    partition_by_vehicle,
    partition_equal,
    synth_trajectories,
)
from .errors import ConfigError, NumericError
from .nn import Dims, ParamSet, TrainBatch, forward, init_params, model_divergence
from .ranking import (
    CompensatorState,
    RankEntry,
    build_rank_entries,
    decay_compensators,
    sample_proportional,
    select_top_k,
)
from .training import evaluate_rmse, train_local


@dataclass
class ClientRuntime:
    """Everything one simulated client owns during a run."""

    client_id: int
    n_points: int                     # raw dataset size (all segments)
    train_inputs: np.ndarray          # (m_train, S, 2) normalized
    train_targets: np.ndarray         # (m_train, 2)
    window_starts: np.ndarray         # flat stream index of each window's first point
    stream_coords: np.ndarray         # (n_stream, 2) normalized training stream
    hold_inputs: np.ndarray
    hold_targets: np.ndarray
    plan: AvailabilityPlan
    reveal: RevealState
    link: LinkState
    model: ParamSet
    cache: CollabCache | None = None
    rng_reveal: np.random.Generator = None
    rng_conn: np.random.Generator = None
    rng_train: np.random.Generator = None
    rng_eval: np.random.Generator = None
    centroid: np.ndarray = None

    def usable_window_indices(self) -> np.ndarray:
        """Training windows whose points have all been revealed."""
        m = self.window_starts.size
        if m == 0:
            return np.zeros(0, dtype=int)
        span = self.train_inputs.shape[1] + 1
        csum = np.concatenate([[0], np.cumsum(self.reveal.available)])
        counts = csum[self.window_starts + span] - csum[self.window_starts]
        return np.flatnonzero(counts == span)

    def position(self) -> np.ndarray:
        if self.link.last_position is not None:
            return self.link.last_position
        return self.centroid


@dataclass
class RoundLog:
    """Everything recorded about one round."""

    t: int
    eta: float
    online: list[int]
    recovered: list[int]
    offline: list[int]
    provenance: dict[int, str] = field(default_factory=dict)
    entries: list[RankEntry] = field(default_factory=list)
    ranked: bool = False
    selected: list[int] = field(default_factory=list)
    alpha: float | None = None
    rmse_global: float = float("nan")
    client_rmse: dict[int, float] = field(default_factory=dict)
    decentralized: bool = False
    payloads: dict[int, int] = field(default_factory=dict)
    collab_sources: dict[int, int] = field(default_factory=dict)
    events: list[str] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    logs: list[RoundLog]
    global_model: ParamSet | None
    bbox: BBox

    def final_rmse(self) -> float:
        return self.logs[-1].rmse_global

    def best_rmse(self) -> float:
        return min(log.rmse_global for log in self.logs)

    def final_client_rmse(self) -> dict[int, float]:
        """Latest logged per-client holdout error for every client seen."""
        latest: dict[int, float] = {}
        for log in self.logs:
            latest.update(log.client_rmse)
        return latest


def aggregate(models: list[ParamSet], weights: list[float] | None = None) -> ParamSet:
    """Per-parameter mean of the uploaded models, unweighted by default."""
    if not models:
        raise ConfigError("cannot aggregate zero models")
    dims = models[0].dims
    for m in models[1:]:
        if m.dims != dims:
            raise ConfigError("cannot aggregate models with differing dims")
    if weights is None:
        w = np.full(len(models), 1.0 / len(models))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(models),) or np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("weights must be nonnegative with a positive sum")
        w = w / w.sum()
    lstm = sum(wi * m.lstm_block for wi, m in zip(w, models))
    fc = sum(wi * m.fc_block for wi, m in zip(w, models))
    return ParamSet(lstm, fc, dims)


def local_update(
    init: ParamSet,
    global_model: ParamSet,
    inputs: np.ndarray,
    targets: np.ndarray,
    epochs: int,
    eta: float,
    batch_size: int,
    rng: np.random.Generator,
    prox_mu: float = 0.0,
    kl_anchor: ParamSet | None = None,
) -> tuple[ParamSet, float]:
    """One client-side update; returns the new model and its divergence
    from the round's global model (full flattened parameter distributions)."""
    updated = train_local(
        init,
        inputs,
        targets,
        epochs,
        eta,
        batch_size,
        rng,
        kl_anchor=kl_anchor,
        prox_mu=prox_mu,
        prox_ref=init.copy() if prox_mu > 0 else None,
    )
    return updated, model_divergence(updated, global_model)


# ---------------------------------------------------------------------------
# data preparation


def load_trajectories(config: ExperimentConfig):
    if config.dataset == "synthetic":
        return synth_trajectories(
            config.seed, config.synth_vehicles, config.synth_points_each, config.synth_kind
        )
    if config.dataset == "csv":
        trajectories, _ = parse_csv(config.data_path)
    else:
        trajectories, _ = parse_tdrive(config.data_path)
    if not trajectories:
        raise ConfigError(f"no trajectories parsed from {config.data_path}")
    return trajectories


def _client_plan(
    config: ExperimentConfig,
    regions_raw: list[np.ndarray],
    datasize_p: float | None,
    rng_plan: np.random.Generator,
) -> AvailabilityPlan:
    """Availability probabilities over one client's training stream."""
    parts = []
    for region in regions_raw:
        n = region.shape[0]
        if n == 0:
            continue
        if config.scenario == "random":
            parts.append(assign_random(n, config.alpha_dir, rng_plan))
        elif config.scenario == "regional":
            areas = [WeakArea(*box) for box in config.weak_areas]
            parts.append(assign_regional(region, areas, config.p_low, config.p_high))
        elif config.scenario == "datasize":
            parts.append(np.full(n, datasize_p))
        else:  # constant
            parts.append(np.full(n, config.constant_p))
    probs = np.concatenate(parts) if parts else np.zeros(0)
    return AvailabilityPlan(probs, config.scenario)


def prepare_clients(config: ExperimentConfig):
    """Build per-client runtimes, the frozen bbox, and the global holdout."""
    dims = Dims(config.n_in, config.hidden, config.n_out)
    trajectories = load_trajectories(config)
    if config.partition == "equal":
        datasets = partition_equal(trajectories, config.n_clients, config.points_per_client)
    else:
        datasets = partition_by_vehicle(trajectories, config.vehicles_per_client)
        if len(datasets) != config.n_clients:
            raise ConfigError(
                f"by-vehicle partition yields {len(datasets)} clients, "
                f"config says {config.n_clients}"
            )

    seq_len = config.seq_len
    # First pass: window split per client, collecting training-region points.
    split_info = []
    train_point_arrays = []
    for ds in datasets:
        seg_windows = [max(0, seg.shape[0] - seq_len) for seg in ds.segments]
        m = sum(seg_windows)
        if m >= 2:
            n_hold = min(m - 1, max(1, round(config.holdout_fraction * m)))
        else:
            n_hold = 0
        n_train = m - n_hold
        regions = []
        remaining = n_train
        for seg, m_s in zip(ds.segments, seg_windows):
            k_s = min(m_s, remaining)
            remaining -= k_s
            regions.append(seg[: k_s + seq_len] if k_s > 0 else seg[:0])
        split_info.append((ds, n_train, n_hold, regions))
        train_point_arrays.extend(r for r in regions if r.shape[0])

    if not train_point_arrays:
        raise ConfigError("no client has enough points to form a single window")
    bbox = BBox.from_points(np.concatenate(train_point_arrays))

    counts = [ds.n_points for ds in datasets]
    datasize_probs = None
    if config.scenario == "datasize":
        threshold = datasize_threshold(counts, config.datasize_percentile)
        datasize_probs = assign_by_datasize(
            counts, threshold, config.p_company, config.p_private
        )

    root = np.random.SeedSequence(config.seed)
    server_ss, select_ss, clients_ss = root.spawn(3)
    client_seqs = clients_ss.spawn(len(datasets))
    rng_server = np.random.default_rng(server_ss)
    rng_select = np.random.default_rng(select_ss)

    global_model = init_params(dims, rng_server)

    clients: dict[int, ClientRuntime] = {}
    hold_inputs_all, hold_targets_all = [], []
    for (ds, n_train, n_hold, regions), ss in zip(split_info, client_seqs):
        plan_ss, reveal_ss, conn_ss, train_ss, eval_ss = ss.spawn(5)
        inputs_parts, targets_parts, starts_parts = [], [], []
        offset = 0
        for region in regions:
            k_s = max(0, region.shape[0] - seq_len)
            if k_s > 0:
                seg_norm = bbox.normalize(region)
                ins, tgt = make_windows(seg_norm, seq_len)
                inputs_parts.append(ins)
                targets_parts.append(tgt)
                starts_parts.append(offset + np.arange(k_s))
            offset += region.shape[0]
        if inputs_parts:
            train_inputs = np.concatenate(inputs_parts)
            train_targets = np.concatenate(targets_parts)
            window_starts = np.concatenate(starts_parts)
            stream_coords = bbox.normalize(np.concatenate([r for r in regions if r.shape[0]]))
        else:
            train_inputs = np.zeros((0, seq_len, 2))
            train_targets = np.zeros((0, 2))
            window_starts = np.zeros(0, dtype=int)
            stream_coords = np.zeros((0, 2))

        # holdout: the last n_hold windows of the full per-client window list
        if n_hold > 0:
            all_windows = [
                make_windows(bbox.normalize(seg), seq_len)
                for seg in ds.segments
                if seg.shape[0] > seq_len
            ]
            flat_ins = np.concatenate([w[0] for w in all_windows])
            flat_tgt = np.concatenate([w[1] for w in all_windows])
            assert flat_ins.shape[0] == n_train + n_hold
            hold_inputs = flat_ins[n_train:]
            hold_targets = flat_tgt[n_train:]
        else:
            hold_inputs = np.zeros((0, seq_len, 2))
            hold_targets = np.zeros((0, 2))
        hold_inputs_all.append(hold_inputs)
        hold_targets_all.append(hold_targets)

        datasize_p = None if datasize_probs is None else float(datasize_probs[ds.client_id])
        plan = _client_plan(config, regions, datasize_p, np.random.default_rng(plan_ss))
        reveal = RevealState(n_points=stream_coords.shape[0], slice_size=config.slice_points)

        if stream_coords.shape[0]:
            centroid = stream_coords.mean(axis=0)
        elif ds.n_points:
            centroid = bbox.normalize(ds.all_points()).mean(axis=0)
        else:
            centroid = np.array([0.5, 0.5])

        clients[ds.client_id] = ClientRuntime(
            client_id=ds.client_id,
            n_points=ds.n_points,
            train_inputs=train_inputs,
            train_targets=train_targets,
            window_starts=window_starts,
            stream_coords=stream_coords,
            hold_inputs=hold_inputs,
            hold_targets=hold_targets,
            plan=plan,
            reveal=reveal,
            link=LinkState(budget_remaining=config.budget),
            model=global_model.copy(),
            rng_reveal=np.random.default_rng(reveal_ss),
            rng_conn=np.random.default_rng(conn_ss),
            rng_train=np.random.default_rng(train_ss),
            rng_eval=np.random.default_rng(eval_ss),
            centroid=centroid,
        )

    global_hold_inputs = np.concatenate(hold_inputs_all)
    global_hold_targets = np.concatenate(hold_targets_all)
    if global_hold_inputs.shape[0] == 0:
        raise ConfigError("holdout is empty; clients have too few windows")
    return clients, global_model, bbox, (global_hold_inputs, global_hold_targets), rng_select


def _reveal_all(clients: dict[int, ClientRuntime]) -> None:
    for cid in sorted(clients):
        client = clients[cid]
        new_idx = reveal_round(client.reveal, client.plan, client.rng_reveal)
        if new_idx.size:
            client.link.last_position = client.stream_coords[int(new_idx.max())].copy()


def _holdout_rmse(config: ExperimentConfig, bbox: BBox, model, inputs, targets) -> float:
    if config.rmse_units == "degrees":
        # min-max normalization is per-axis affine, so degree-space RMSE needs
        # the per-axis errors rescaled before pooling
        preds, _ = forward(model, TrainBatch(inputs, targets))
        err = (preds - targets) * bbox.scale()
        return float(np.sqrt(np.mean(err * err)))
    return evaluate_rmse(model, inputs, targets)


def _sample_eval_batch(client: ClientRuntime, usable: np.ndarray, batch_size: int):
    take = min(batch_size, usable.size)
    if take == 0:
        return None
    picked = client.rng_eval.choice(usable, size=take, replace=False)
    picked = np.sort(picked)
    return client.train_inputs[picked], client.train_targets[picked]


def _decentralized_round(
    config: ExperimentConfig,
    clients: dict[int, ClientRuntime],
    offline: list[int],
    eta: float,
    log: RoundLog,
) -> None:
    """Peer-collaboration pass over the offline set with snapshot semantics."""
    log.decentralized = True
    if not offline:
        return
    dims = next(iter(clients.values())).model.dims
    heads = {cid: clients[cid].model.fc_block.copy() for cid in sorted(clients)}
    positions = {cid: clients[cid].position() for cid in sorted(clients)}
    graph = build_neighbor_graph(positions, config.chi)
    for u in sorted(offline):
        client = clients[u]
        usable = client.usable_window_indices()
        if usable.size:
            try:
                client.model = collaborative_local_update(
                    client.model,
                    client.cache,
                    client.train_inputs[usable],
                    client.train_targets[usable],
                    config.epochs,
                    eta,
                    config.batch_size,
                    client.rng_train,
                )
            except NumericError:
                # divergence aborts this client's peer round only
                log.events.append(f"numeric_abort_peer:{u}")
                continue
        else:
            log.events.append(f"peer_update_skipped:{u}")
        batch = _sample_eval_batch(client, usable, config.batch_size)
        if batch is None:
            # nothing to score candidates on: skip the exchange entirely
            log.events.append(f"peer_eval_skipped:{u}")
            continue
        neighbors = [(nid, heads[nid]) for nid, _ in graph[u]]
        log.payloads[u] = head_payload_values(len(neighbors), dims)
        client.cache = evaluate_candidates(client.model, u, neighbors, batch[0], batch[1])
        log.collab_sources[u] = client.cache.source_id


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full round loop for any server-aggregating variant."""
    if config.variant == "local_only":
        raise ConfigError("use run_local_only for the local_only variant")
    clients, global_model, bbox, holdout, rng_select = prepare_clients(config)
    comp = CompensatorState(
        alpha=config.alpha0,
        delta_alpha=config.alpha_step,
        delta_beta=config.delta_beta,
        gamma=config.gamma,
        beta0=config.beta0,
    )
    ranked_mode = config.selection_mode in ("ranked", "proportional")
    states = {cid: clients[cid].link for cid in clients}
    rngs_conn = {cid: clients[cid].rng_conn for cid in clients}

    # one slice arrives before the first round so early training is possible
    _reveal_all(clients)

    logs: list[RoundLog] = []
    aborted = False
    for t in range(1, config.rounds + 1):
        eta = config.eta_at(t)
        if t == 1:
            online, recovered, offline = mark_all_online(states)
        else:
            online, recovered, offline = step_connectivity(
                states, config.p_offline, config.p_recover, rngs_conn
            )
        log = RoundLog(t=t, eta=eta, online=online, recovered=recovered, offline=offline)
        log.ranked = ranked_mode
        _reveal_all(clients)

        recovered_set = set(recovered)
        trained: dict[int, float] = {}
        for cid in online:
            client = clients[cid]
            if cid in recovered_set:
                log.provenance[cid] = "local"
                kl_anchor = client.cache.model if client.cache is not None else None
            else:
                client.model = global_model.copy()
                log.provenance[cid] = "global"
                kl_anchor = None
            usable = client.usable_window_indices()
            if usable.size == 0:
                log.provenance[cid] = "skip"
                log.events.append(f"no_usable_windows:{cid}")
                continue
            try:
                client.model, divergence = local_update(
                    client.model,
                    global_model,
                    client.train_inputs[usable],
                    client.train_targets[usable],
                    config.epochs,
                    eta,
                    config.batch_size,
                    client.rng_train,
                    prox_mu=config.proximal_mu,
                    kl_anchor=kl_anchor,
                )
            except NumericError:
                # divergence aborts the run; logs so far are kept
                log.events.append(f"numeric_abort:client={cid}")
                aborted = True
                break
            trained[cid] = divergence
            if client.hold_inputs.shape[0]:
                log.client_rmse[cid] = evaluate_rmse(
                    client.model, client.hold_inputs, client.hold_targets
                )
        if aborted:
            log.rmse_global = _holdout_rmse(config, bbox, global_model, holdout[0], holdout[1])
            logs.append(log)
            break

        participants = [cid for cid in sorted(trained) if clients[cid].link.can_upload]
        for cid in sorted(trained):
            if not clients[cid].link.can_upload:
                log.events.append(f"budget_exhausted:{cid}")
        m_t = len(participants)
        log.entries = [
            RankEntry(
                client_id=cid,
                divergence=trained[cid],
                participation=participation(clients[cid].link.n_uploads, t),
                n_updates=clients[cid].link.n_uploads,
            )
            for cid in participants
        ]

        if m_t == 0:
            log.events.append("empty_selection")
            log.selected = []
        elif ranked_mode:
            build_rank_entries(log.entries, comp, m_t)
            if config.selection_mode == "proportional":
                log.selected = sample_proportional(log.entries, config.k_selected, rng_select)
            else:
                log.selected = select_top_k(log.entries, config.k_selected)
        else:
            take = min(config.k_selected, m_t)
            picked = rng_select.choice(np.array(participants), size=take, replace=False)
            log.selected = sorted(int(c) for c in picked)

        for cid in log.selected:
            charge_upload(clients[cid].link)

        if log.selected:
            uploaded = [clients[cid].model for cid in sorted(log.selected)]
            if config.aggregate_by_datasize:
                sizes = [float(clients[cid].n_points) for cid in sorted(log.selected)]
                global_model = aggregate(uploaded, weights=sizes)
            else:
                global_model = aggregate(uploaded)

        if ranked_mode:
            decay_compensators(comp, participants)
            log.alpha = comp.alpha

        if config.is_decentral_round(t):
            _decentralized_round(config, clients, offline, eta, log)
        elif config.offline_train_every_round:
            for u in sorted(offline):
                client = clients[u]
                usable = client.usable_window_indices()
                if usable.size:
                    client.model = train_local(
                        client.model,
                        client.train_inputs[usable],
                        client.train_targets[usable],
                        config.epochs,
                        eta,
                        config.batch_size,
                        client.rng_train,
                    )

        log.rmse_global = _holdout_rmse(config, bbox, global_model, holdout[0], holdout[1])
        logs.append(log)

    return ExperimentResult(config=config, logs=logs, global_model=global_model, bbox=bbox)


def run_local_only(config: ExperimentConfig) -> ExperimentResult:
    """Isolated training baseline: same data, rounds, and update counts, but
    no aggregation and no information exchange of any kind."""
    clients, global_model, bbox, holdout, _ = prepare_clients(config)
    for client in clients.values():
        # local-only clients never see the shared initialization
        client.model = init_params(global_model.dims, client.rng_train)
    _reveal_all(clients)
    logs: list[RoundLog] = []
    for t in range(1, config.rounds + 1):
        eta = config.eta_at(t)
        ids = sorted(clients)
        log = RoundLog(t=t, eta=eta, online=ids, recovered=[], offline=[])
        _reveal_all(clients)
        per_client = []
        for cid in ids:
            client = clients[cid]
            usable = client.usable_window_indices()
            if usable.size == 0:
                log.provenance[cid] = "skip"
                log.events.append(f"no_usable_windows:{cid}")
                continue
            log.provenance[cid] = "local"
            client.model = train_local(
                client.model,
                client.train_inputs[usable],
                client.train_targets[usable],
                config.epochs,
                eta,
                config.batch_size,
                client.rng_train,
            )
            if client.hold_inputs.shape[0]:
                rmse = evaluate_rmse(client.model, client.hold_inputs, client.hold_targets)
                log.client_rmse[cid] = rmse
                per_client.append(rmse)
        # no global model exists; report the mean per-client holdout error
        log.rmse_global = float(np.mean(per_client)) if per_client else float("nan")
        logs.append(log)
    return ExperimentResult(config=config, logs=logs, global_model=None, bbox=bbox)
