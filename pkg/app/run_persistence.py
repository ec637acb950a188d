#!/usr/bin/env python3
"""
Run Persistence for Experiment Results

Stores each finished experiment in its own directory: runs/{run_id}/

Each run directory contains:
- <table>.csv: one file per result table
- manifest.json: spec echo, output paths, schedules with their c values, mass ledgers, wall time
- report.md: human-readable summary rendered from app/templates/run_report.md.j2
"""

import csv
import json
import shutil
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from jinja2 import Environment, FileSystemLoader
from pydantic import BaseModel, Field
from pydantic_core import to_jsonable_python

from app.experiments import ExperimentResult, ExperimentSpec

TEMPLATES_DIR = Path(__file__).parent / "templates"


class RunManifest(BaseModel):
    run_id: str
    spec: Dict[str, Any]
    outputs: Dict[str, str] = Field(default_factory=dict)
    schedules: List[Dict[str, Any]] = Field(default_factory=list)
    wall_time: float = 0.0
    mass_ledger: List[Dict[str, Any]] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
    created_at: str


def format_value(value: Any) -> str:
    """Round-trip text for floats (numpy scalars included); everything else via str"""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    if isinstance(value, np.bool_):
        return str(bool(value))
    return str(value)


def write_csv(path: Path, rows: List[Dict[str, Any]]) -> None:
    fieldnames: List[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_value(value) for key, value in row.items()})


class RunPersistence:
    """Manages persistent storage of experiment runs"""

    def __init__(self, base_dir: Optional[Path] = None, write_report: bool = True):
        if base_dir is None:
            base_dir = Path(__file__).parent.parent / "runs"
        self.base_dir = Path(base_dir)
        self.write_report = write_report

    def generate_run_id(self, name: str) -> str:
        """Spec name plus timestamp for chronological ordering"""
        timestamp = datetime.now().strftime("%m%d_%H%M%S")
        short_uuid = str(uuid.uuid4())[:4]
        return f"{name}_{timestamp}_{short_uuid}"

    def get_run_dir(self, run_id: str) -> Path:
        return self.base_dir / run_id

    def run_exists(self, run_id: str) -> bool:
        return (self.get_run_dir(run_id) / "manifest.json").exists()

    def save(self, spec: ExperimentSpec, result: ExperimentResult) -> RunManifest:
        """Write tables, manifest and report for a finished run.

        Files go to a hidden staging directory that is renamed to the run
        directory once everything is written.
        """
        run_id = self.generate_run_id(spec.name)
        run_dir = self.get_run_dir(run_id)
        staging = self.base_dir / f".{run_id}.partial"
        staging.mkdir(parents=True, exist_ok=False)

        try:
            outputs: Dict[str, str] = {}
            for table_name, rows in result.tables.items():
                write_csv(staging / f"{table_name}.csv", rows)
                outputs[table_name] = str(run_dir / f"{table_name}.csv")

            manifest = RunManifest(
                run_id=run_id,
                spec=spec.model_dump(mode="json"),
                outputs=outputs,
                schedules=result.schedules,
                wall_time=result.wall_time,
                mass_ledger=[ledger.summary() for ledger in result.ledgers if ledger.masses],
                summary=result.summary,
                created_at=datetime.now(timezone.utc).isoformat(),
            )
            if self.write_report:
                manifest.outputs["report"] = str(run_dir / "report.md")
                (staging / "report.md").write_text(self.render_report(manifest, result), encoding='utf-8')

            manifest.outputs["manifest"] = str(run_dir / "manifest.json")
            with open(staging / "manifest.json", 'w') as f:
                json.dump(to_jsonable_python(manifest), f, indent=2)
            staging.rename(run_dir)
        except Exception:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        return manifest

    def render_report(self, manifest: RunManifest, result: ExperimentResult) -> str:
        env = Environment(loader=FileSystemLoader(str(TEMPLATES_DIR)), autoescape=False,
                          trim_blocks=True, lstrip_blocks=True)
        env.filters["num"] = lambda v: f"{float(v):.6g}" if isinstance(v, (float, np.floating)) else v
        template = env.get_template("run_report.md.j2")
        return template.render(manifest=manifest, tables=result.tables, max_rows=40)

    def load_manifest(self, run_id: str) -> Optional[Dict[str, Any]]:
        if not self.run_exists(run_id):
            return None
        with open(self.get_run_dir(run_id) / "manifest.json", 'r') as f:
            return json.load(f)
