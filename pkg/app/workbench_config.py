"""
Workbench configuration.
Loads config.yaml (plus .env) into typed settings with environment overrides.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

PROJECT_ROOT = Path(__file__).parent.parent

load_dotenv()


class OutputSettings(BaseModel):
    base_dir: str = "runs"
    write_report: bool = True


class SolverDefaults(BaseModel):
    richardson_theta: float = 0.5
    gmres_breakdown_tol: float = 1e-14
    root_bracket_upper: float = 3.0
    root_scan_points: int = Field(default=600, ge=10)
    max_dense_cells: int = 2048


class ExperimentDefaults(BaseModel):
    specs_dir: str = "specs"
    default_jobs: int = Field(default=1, ge=1)


class TableauSettings(BaseModel):
    local_dir: str = "tableaus"


class LogfireSettings(BaseModel):
    enabled: bool = True
    service_name: str = "conserva"
    environment: str = "development"
    log_level: str = "INFO"
    console: bool = False


class WorkbenchSettings(BaseModel):
    output: OutputSettings = OutputSettings()
    solvers: SolverDefaults = SolverDefaults()
    experiments: ExperimentDefaults = ExperimentDefaults()
    tableaus: TableauSettings = TableauSettings()
    logfire: LogfireSettings = LogfireSettings()

    def resolve(self, relative: str) -> Path:
        """Resolve a configured directory against the project root"""
        path = Path(relative).expanduser()
        return path if path.is_absolute() else PROJECT_ROOT / path

    def output_dir(self, override: Optional[str] = None) -> Path:
        """CLI flag > CONSERVA_OUT > config.yaml"""
        chosen = override or os.getenv("CONSERVA_OUT") or self.output.base_dir
        return self.resolve(chosen)


def _load_config(config_file: Path) -> Dict[str, Any]:
    """Load configuration from YAML file"""
    if not config_file.exists():
        return {}

    try:
        with open(config_file, 'r') as f:
            return yaml.safe_load(f) or {}
    except Exception as e:
        print(f"Error loading config: {e}")
        return {}


_settings_cache: Dict[Path, WorkbenchSettings] = {}


def load_settings(config_file: Optional[Path] = None) -> WorkbenchSettings:
    """Read config.yaml once per path; invalid sections fall back to defaults"""
    if config_file is None:
        config_file = Path(os.getenv("CONSERVA_CONFIG", PROJECT_ROOT / "config.yaml"))
    config_file = Path(config_file)

    if config_file in _settings_cache:
        return _settings_cache[config_file]

    raw = _load_config(config_file)
    try:
        settings = WorkbenchSettings.model_validate(raw)
    except ValidationError as e:
        print(f"Invalid config in {config_file}, using defaults: {e.error_count()} error(s)")
        settings = WorkbenchSettings()

    _settings_cache[config_file] = settings
    return settings
