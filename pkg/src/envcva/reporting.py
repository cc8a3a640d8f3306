"""Run artifacts, CSV tables and minimal SVG figures."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEMA_VERSION = 1


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_table(out_dir, stem: str, header: list[str], rows) -> str:
    path = os.path.join(out_dir, f"{stem}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in row])
    return path


def line_figure(out_dir, stem: str, x, series: dict, xlabel: str, ylabel: str,
                title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for label, y in series.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}.svg")
    fig.savefig(path)
    plt.close(fig)
    return path


def bar_figure(out_dir, stem: str, labels, series: dict, ylabel: str,
               title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    width = 0.8 / max(len(series), 1)
    for j, (label, vals) in enumerate(series.items()):
        xs = [i + j * width for i in range(len(labels))]
        ax.bar(xs, vals, width=width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}.svg")
    fig.savefig(path)
    plt.close(fig)
    return path


def hist_figure(out_dir, stem: str, samples: dict, xlabel: str, title: str = "") -> str:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for label, vals in samples.items():
        ax.hist(vals, bins=30, alpha=0.6, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    if len(samples) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}.svg")
    fig.savefig(path)
    plt.close(fig)
    return path


class ArtifactBuilder:
    """Accumulates a reproducible run artifact; single writer."""

    def __init__(self, command: str, config: dict, version: str):
        self._start = time.monotonic()
        self.payload = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": "envcva", "version": version},
            "command": command,
            "config": config,
            "inputs": {},
            "results": {},
        }

    def add_input(self, path) -> None:
        try:
            self.payload["inputs"][str(path)] = file_digest(path)
        except OSError as exc:
            from .errors import DataError
            raise DataError(f"cannot read input {path}: {exc}") from exc

    def add_result(self, key: str, value) -> None:
        self.payload["results"][key] = value

    def write(self, out_dir) -> str:
        self.payload["timing"] = {"seconds": round(time.monotonic() - self._start, 3)}
        path = os.path.join(out_dir, "run.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        return path
