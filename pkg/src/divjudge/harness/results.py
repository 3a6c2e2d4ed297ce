"""Run result document: one JSON file per run plus flat CSV series.

JSON layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "experiment": "exp1",
      "config": {...},             # ExperimentConfig echo
      "distributions": {...},      # parameters of every reference distribution
      "cells": [
        {"key": {"M": 20, "L": 20},
         "estimates": {"disc_kl": {"value", "dispersion", "method", "kind", "meta"}, ...},
         "replicates": [{"seed", "kl", "js", ..., "train_loss_history", ...}],
         "extra": {...}}
      ],
      "timings": {"total_seconds": ..., "cells": [...]}
    }

``timings`` is the only non-deterministic part of the document.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..distributions import DivergenceEstimate
from ..errors import DataError, NumericalError

SCHEMA_VERSION = 1
KEY_ORDER = ("M", "L", "N", "separation")
SERIES_COLUMNS = ("quantity", "method", "kind", "value", "dispersion", "n_seeds")


@dataclass
class Cell:
    key: dict
    estimates: dict = field(default_factory=dict)
    replicates: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "key": dict(self.key),
            "estimates": {k: v.to_dict() for k, v in self.estimates.items()},
            "replicates": list(self.replicates),
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Cell":
        return cls(
            dict(d["key"]),
            {k: DivergenceEstimate.from_dict(v) for k, v in d["estimates"].items()},
            list(d["replicates"]),
            dict(d.get("extra", {})),
        )


@dataclass
class RunResult:
    experiment: str
    config: dict
    distributions: dict = field(default_factory=dict)
    cells: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def cell(self, **key) -> Cell:
        for c in self.cells:
            if all(c.key.get(k) == v for k, v in key.items()):
                return c
        raise KeyError(key)

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "config": self.config,
            "distributions": self.distributions,
            "cells": [c.to_dict() for c in self.cells],
        }
        if timings:
            d["timings"] = self.timings
        return d

    def dumps(self, timings: bool = True) -> str:
        try:
            return json.dumps(self.to_dict(timings), indent=2, sort_keys=True, allow_nan=False) + "\n"
        except ValueError as exc:
            raise NumericalError(f"result contains non-finite values: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise DataError(f"unsupported result schema version {d.get('schema_version')!r}")
        return cls(
            experiment=d["experiment"],
            config=d["config"],
            distributions=d.get("distributions", {}),
            cells=[Cell.from_dict(c) for c in d["cells"]],
            timings=d.get("timings", {}),
            schema_version=d["schema_version"],
        )

    @classmethod
    def loads(cls, text: str) -> "RunResult":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunResult":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def key_columns(self) -> list:
        present = {k for c in self.cells for k in c.key}
        return [k for k in KEY_ORDER if k in present] + sorted(present - set(KEY_ORDER))

    def series_csv(self) -> str:
        """Long-format table: one row per (cell, estimate)."""
        keys = self.key_columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys + list(SERIES_COLUMNS))
        for c in self.cells:
            for name in sorted(c.estimates):
                e = c.estimates[name]
                w.writerow([c.key.get(k, "") for k in keys]
                           + [name, e.method, e.kind, repr(e.value), repr(e.dispersion), e.meta.get("n_seeds", "")])
        return buf.getvalue()

    def loss_curves_csv(self) -> str:
        """Per-epoch training and holdout loss for every replicate."""
        keys = self.key_columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys + ["replicate", "epoch", "train_loss", "holdout_loss"])
        for c in self.cells:
            for r, rep in enumerate(c.replicates):
                tr = rep.get("train_loss_history", [])
                ho = rep.get("holdout_loss_history", [])
                for e, (a, b) in enumerate(zip(tr, ho)):
                    w.writerow([c.key.get(k, "") for k in keys] + [r, e, repr(a), repr(b)])
        return buf.getvalue()

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "result": out / "result.json",
            "series": out / "series.csv",
            "loss_curves": out / "loss_curves.csv",
        }
        paths["result"].write_text(self.dumps(), encoding="utf-8")
        paths["series"].write_text(self.series_csv(), encoding="utf-8")
        paths["loss_curves"].write_text(self.loss_curves_csv(), encoding="utf-8")
        return paths

    def check_finite(self) -> None:
        for c in self.cells:
            for name, e in c.estimates.items():
                if not math.isfinite(e.value):
                    raise NumericalError(f"{name} at {c.key} is not finite")
