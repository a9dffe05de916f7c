"""Experiment outputs: round logs as CSV, a JSON summary, and SVG curves.

rounds.csv is long-format with the fixed column order
``round,record,client,key,value``: one row per round per metric, plus one row
per per-client field. Floats are written with repr precision so a parse
round-trips exactly; id lists are pipe-joined.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import ConfigError
from .experiment import ExperimentResult, RoundLog
from .ranking import RankEntry

CSV_COLUMNS = ["round", "record", "client", "key", "value"]

_PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _ids(ids: list[int]) -> str:
    return "|".join(str(i) for i in ids)


def _parse_ids(raw: str) -> list[int]:
    return [int(part) for part in raw.split("|")] if raw else []


def rows_for_log(log: RoundLog) -> list[list[str]]:
    """Flatten one round into CSV rows in a deterministic order."""
    t = str(log.t)
    rows = [
        [t, "round", "", "eta", _fmt(log.eta)],
        [t, "round", "", "online", _ids(log.online)],
        [t, "round", "", "recovered", _ids(log.recovered)],
        [t, "round", "", "offline", _ids(log.offline)],
        [t, "round", "", "selected", _ids(log.selected)],
        [t, "round", "", "decentralized", _fmt(log.decentralized)],
        [t, "round", "", "rmse_global", _fmt(log.rmse_global)],
    ]
    if log.alpha is not None:
        rows.append([t, "round", "", "alpha", _fmt(log.alpha)])
    rows.append([t, "round", "", "events", ";".join(log.events)])
    for cid in sorted(log.provenance):
        rows.append([t, "client", str(cid), "init", log.provenance[cid]])
    for cid in sorted(log.client_rmse):
        rows.append([t, "client", str(cid), "rmse", _fmt(log.client_rmse[cid])])
    for cid in sorted(log.payloads):
        rows.append([t, "client", str(cid), "payload_values", str(log.payloads[cid])])
    for cid in sorted(log.collab_sources):
        rows.append([t, "client", str(cid), "collab_source", str(log.collab_sources[cid])])
    for entry in sorted(log.entries, key=lambda e: e.client_id):
        cid = str(entry.client_id)
        rows.append([t, "rank", cid, "L", _fmt(entry.divergence)])
        rows.append([t, "rank", cid, "A", _fmt(entry.participation)])
        rows.append([t, "rank", cid, "n", str(entry.n_updates)])
        if log.ranked:
            rows.append([t, "rank", cid, "P_L", str(entry.pos_divergence)])
            rows.append([t, "rank", cid, "P_A", str(entry.pos_participation)])
            rows.append([t, "rank", cid, "R", _fmt(entry.weight)])
    return rows


def write_rounds_csv(logs: list[RoundLog], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for log in logs:
            writer.writerows(rows_for_log(log))


def read_rounds_csv(path: str | Path) -> list[RoundLog]:
    """Rebuild round logs from rounds.csv (inverse of write_rounds_csv)."""
    logs: dict[int, RoundLog] = {}
    entries: dict[int, dict[int, RankEntry]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected header {header}")
        for t_raw, record, client, key, value in reader:
            t = int(t_raw)
            log = logs.setdefault(
                t, RoundLog(t=t, eta=0.0, online=[], recovered=[], offline=[])
            )
            if record == "round":
                if key == "eta":
                    log.eta = float(value)
                elif key == "online":
                    log.online = _parse_ids(value)
                elif key == "recovered":
                    log.recovered = _parse_ids(value)
                elif key == "offline":
                    log.offline = _parse_ids(value)
                elif key == "selected":
                    log.selected = _parse_ids(value)
                elif key == "decentralized":
                    log.decentralized = value == "1"
                elif key == "rmse_global":
                    log.rmse_global = float(value)
                elif key == "alpha":
                    log.alpha = float(value)
                elif key == "events":
                    log.events = value.split(";") if value else []
            elif record == "client":
                cid = int(client)
                if key == "init":
                    log.provenance[cid] = value
                elif key == "rmse":
                    log.client_rmse[cid] = float(value)
                elif key == "payload_values":
                    log.payloads[cid] = int(value)
                elif key == "collab_source":
                    log.collab_sources[cid] = int(value)
            elif record == "rank":
                cid = int(client)
                entry = entries.setdefault(t, {}).setdefault(
                    cid,
                    RankEntry(client_id=cid, divergence=0.0, participation=0.0, n_updates=0),
                )
                if key == "L":
                    entry.divergence = float(value)
                elif key == "A":
                    entry.participation = float(value)
                elif key == "n":
                    entry.n_updates = int(value)
                elif key == "P_L":
                    entry.pos_divergence = int(value)
                    log.ranked = True
                elif key == "P_A":
                    entry.pos_participation = int(value)
                elif key == "R":
                    entry.weight = float(value)
    for t, per_round in entries.items():
        logs[t].entries = [per_round[cid] for cid in sorted(per_round)]
    return [logs[t] for t in sorted(logs)]


def summary_dict(result: ExperimentResult) -> dict:
    return {
        "variant": result.config.variant,
        "seed": result.config.seed,
        "rounds": len(result.logs),
        "n_clients": result.config.n_clients,
        "final_rmse": result.final_rmse(),
        "best_rmse": result.best_rmse(),
        "final_client_rmse": {
            str(cid): value for cid, value in sorted(result.final_client_rmse().items())
        },
        "config": json.loads(result.config.to_json()),
    }


def write_summary_json(result: ExperimentResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(summary_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


def rmse_series(logs: list[RoundLog]) -> list[tuple[float, float]]:
    return [(float(log.t), float(log.rmse_global)) for log in logs]


def write_curves_svg(
    series: dict[str, list[tuple[float, float]]],
    path: str | Path,
    title: str = "test RMSE by round",
    width: int = 720,
    height: int = 440,
) -> None:
    """Plot one polyline per labeled series with a text legend."""
    if not series:
        raise ConfigError("nothing to plot")
    margin_l, margin_r, margin_t, margin_b = 60, 20, 40, 45
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if y == y]  # drop NaN
    if not xs or not ys:
        raise ConfigError("series contain no plottable points")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return margin_t + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" font-size="15" text-anchor="middle" '
        f'font-family="sans-serif">{title}</text>',
        # axes
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>',
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" x2="{margin_l + plot_w}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>',
        f'<text x="{margin_l - 8}" y="{sy(y_hi):.1f}" font-size="11" text-anchor="end" '
        f'font-family="sans-serif">{y_hi:.4g}</text>',
        f'<text x="{margin_l - 8}" y="{sy(y_lo):.1f}" font-size="11" text-anchor="end" '
        f'font-family="sans-serif">{y_lo:.4g}</text>',
        f'<text x="{sx(x_lo):.1f}" y="{height - 14}" font-size="11" text-anchor="middle" '
        f'font-family="sans-serif">{x_lo:.4g}</text>',
        f'<text x="{sx(x_hi):.1f}" y="{height - 14}" font-size="11" text-anchor="middle" '
        f'font-family="sans-serif">{x_hi:.4g}</text>',
        f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 4}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">round</text>',
    ]
    for idx, (label, pts) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts if y == y
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
        )
        ly = margin_t + 14 + 16 * idx
        lx = margin_l + plot_w - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-size="12" font-family="sans-serif">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def emit_reports(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    """Write rounds.csv, summary.json, and curves.svg into out_dir."""
    if not result.logs:
        raise ConfigError("no round logs to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "rounds": out_dir / "rounds.csv",
        "summary": out_dir / "summary.json",
        "curves": out_dir / "curves.svg",
    }
    write_rounds_csv(result.logs, paths["rounds"])
    write_summary_json(result, paths["summary"])
    write_curves_svg({result.config.variant: rmse_series(result.logs)}, paths["curves"])
    return paths


def collect_series(run_dirs: list[str | Path]) -> dict[str, list[tuple[float, float]]]:
    """Merge several run directories into one labeled series map for plotting."""
    series: dict[str, list[tuple[float, float]]] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        rounds_path = run_dir / "rounds.csv"
        if not rounds_path.exists():
            raise ConfigError(f"{run_dir} contains no rounds.csv")
        label = run_dir.name
        summary_path = run_dir / "summary.json"
        if summary_path.exists():
            with summary_path.open(encoding="utf-8") as fh:
                meta = json.load(fh)
            label = f"{meta.get('variant', label)} (seed {meta.get('seed', '?')})"
        if label in series:
            label = f"{label} [{run_dir.name}]"
        series[label] = rmse_series(read_rounds_csv(rounds_path))
    return series
