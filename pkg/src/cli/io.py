"""Graph JSON loading, energy parsing and CSV output for the command-line front end."""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from src.common.models import ConeSystem, QuantumGraphSpec
from src.edge.solutions import ComplexEnergy
from src.graph.core import build_universal_cover_system

logger = logging.getLogger(__name__)

GraphInput = Union[ConeSystem, QuantumGraphSpec]


def load_graph(path: Union[str, Path]) -> GraphInput:
    """Read a graph file.

    Three shapes are accepted: a cone system (has ``matrix``), a finite base
    graph (has ``vertices`` and ``edges``), or ``{"regular": {"q": ..}}``
    with optional ``length``, ``alpha`` and ``potential``.
    """
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    if "regular" in data:
        return ConeSystem.regular(**data["regular"])
    if "matrix" in data:
        return ConeSystem.model_validate(data)
    if "vertices" in data and "edges" in data:
        return QuantumGraphSpec.model_validate(data)
    raise ValueError(f"{path}: not a cone system, base graph or regular-tree description")


def load_system(path: Union[str, Path], root_edge: Optional[tuple[int, int]] = None) -> tuple[ConeSystem, Optional[QuantumGraphSpec]]:
    """Cone system for a graph file, lifting base graphs to their universal cover."""
    graph = load_graph(path)
    if isinstance(graph, QuantumGraphSpec):
        return build_universal_cover_system(graph, root_edge), graph
    return graph, None


def parse_energies(texts: Iterable[str]) -> list[ComplexEnergy]:
    return [ComplexEnergy.parse(text) for text in texts]


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return value


def write_csv(path: Union[str, Path], fieldnames: list[str], rows: Iterable[dict]) -> Path:
    """Write rows with full float precision; complex values must already be split into columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        count = 0
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in fieldnames})
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))
