"""
Run manifests and report files.
"""
import csv
import hashlib
import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import networkx
import numpy
import ot
import pydantic
import scipy

from .. import __version__
from ..models.schemas import RunManifest
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)


def to_jsonable(value: Any) -> Any:
    """Plain JSON types for numpy scalars, arrays, tuples, sets and dataclass-like reports."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(to_jsonable(v) for v in value)
    if isinstance(value, numpy.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, numpy.bool_):
        return bool(value)
    if isinstance(value, numpy.integer):
        return int(value)
    if isinstance(value, (float, numpy.floating)):
        value = float(value)
        return value if math.isfinite(value) else format_float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


class ManifestService:
    """Writes one manifest per experiment plus its CSV/JSON outputs."""

    def __init__(self, output_dir: Optional[str] = None):
        """Initialize the manifest service."""
        self.output_dir = Path(output_dir or get_config().get("experiments.output_dir", "runs"))
        self.output_dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def config_hash(parameters: Dict[str, Any]) -> str:
        """SHA-256 of the canonical JSON of the experiment inputs."""
        canonical = json.dumps(to_jsonable(parameters), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @staticmethod
    def module_versions() -> Dict[str, str]:
        return {
            "spinlab": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "networkx": networkx.__version__,
            "pot": ot.__version__,
            "pydantic": pydantic.VERSION,
        }

    def path_for(self, name: str) -> Path:
        return self.output_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """CSV with a header row; floats at 17 significant digits."""
        path = self.path_for(name)
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(list(header))
                for row in rows:
                    writer.writerow([format_float(x) if isinstance(x, float) else x for x in row])
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            raise
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self.path_for(name)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(to_jsonable(data), f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            raise
        return path

    def write_manifest(
        self,
        experiment: str,
        parameters: Dict[str, Any],
        seed: Optional[int],
        started_at: datetime,
        wall_clock_seconds: float,
        outcome: Dict[str, Any],
        outputs: Optional[List[Path]] = None,
    ) -> Path:
        """Write ``<experiment>-<hash prefix>.manifest.json`` and return its path."""
        config_hash = self.config_hash({"experiment": experiment, "seed": seed, **parameters})
        manifest = RunManifest(
            experiment=experiment,
            config_hash=config_hash,
            seed=seed,
            module_versions=self.module_versions(),
            started_at=started_at,
            wall_clock_seconds=wall_clock_seconds,
            parameters=to_jsonable(parameters),
            outcome=to_jsonable(outcome),
            outputs=[p.name for p in outputs or []],
        )
        path = self.path_for(f"{experiment}-{config_hash[:12]}.manifest.json")
        try:
            path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Failed to write manifest {path}: {e}")
            raise
        logger.info(f"Wrote manifest {path}")
        return path

    @staticmethod
    def load_manifest(path: Path) -> RunManifest:
        try:
            return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except (OSError, pydantic.ValidationError) as e:
            logger.error(f"Failed to load manifest {path}: {e}")
            raise
