"""Input and configuration models: potentials, quantum graphs, cone systems, ensembles."""

import math
from typing import Literal, Optional

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

PotentialVariant = Literal["zero", "constant", "cosine", "sampled"]
DistributionFamily = Literal["uniform", "two_point", "beta"]


class PotentialSpec(BaseModel):
    """Edge potential W_b, parametrised on [0, L_b]."""

    model_config = ConfigDict(frozen=True)

    variant: PotentialVariant = "zero"
    c: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    values: tuple[float, ...] = ()
    symmetric: bool = False

    @model_validator(mode="after")
    def _check(self) -> "PotentialSpec":
        if self.variant == "sampled":
            if len(self.values) < 2:
                raise ValueError("sampled potential needs at least two grid values")
            if not all(math.isfinite(v) for v in self.values):
                raise ValueError("sampled potential values must be finite")
            if self.symmetric and not np.allclose(self.values, self.values[::-1]):
                raise ValueError("sampled potential flagged symmetric but W(L-x) != W(x)")
        for name in ("c", "c1", "c2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"potential parameter {name} must be finite")
        return self

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls()

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls(variant="constant", c=c)

    @classmethod
    def cosine(cls, c1: float, c2: float) -> "PotentialSpec":
        """W(x) = c1 + c2 cos(2 pi x / L), one period per edge."""
        return cls(variant="cosine", c1=c1, c2=c2)

    @classmethod
    def sampled(cls, values, symmetric: bool = False) -> "PotentialSpec":
        """W sampled on a uniform grid spanning [0, L], linearly interpolated."""
        return cls(variant="sampled", values=tuple(float(v) for v in values), symmetric=symmetric)

    @property
    def is_closed_form(self) -> bool:
        """True when fundamental solutions are trigonometric (zero or constant W)."""
        return self.variant in ("zero", "constant")

    @property
    def shift(self) -> float:
        """Energy shift of a closed-form potential."""
        return self.c if self.variant == "constant" else 0.0

    @property
    def is_symmetric(self) -> bool:
        if self.variant == "sampled":
            return bool(np.allclose(self.values, self.values[::-1]))
        return True

    def evaluate(self, x, length: float) -> np.ndarray:
        """Evaluate W at points x of an edge of the given length."""
        x = np.asarray(x, dtype=float)
        if self.variant == "zero":
            return np.zeros_like(x)
        if self.variant == "constant":
            return np.full_like(x, self.c)
        if self.variant == "cosine":
            return self.c1 + self.c2 * np.cos(2.0 * np.pi * x / length)
        grid = np.linspace(0.0, length, len(self.values))
        return np.interp(x, grid, self.values)

    def reversed(self) -> "PotentialSpec":
        """Potential of the reversed edge: W_rev(x) = W(L - x)."""
        if self.variant == "sampled":
            return self.model_copy(update={"values": self.values[::-1]})
        return self

    def max_abs(self) -> float:
        if self.variant == "zero":
            return 0.0
        if self.variant == "constant":
            return abs(self.c)
        if self.variant == "cosine":
            return abs(self.c1) + abs(self.c2)
        return float(np.max(np.abs(self.values)))

    def min_value(self) -> float:
        if self.variant == "zero":
            return 0.0
        if self.variant == "constant":
            return self.c
        if self.variant == "cosine":
            return self.c1 - abs(self.c2)
        return float(np.min(self.values))


class EdgeSpec(BaseModel):
    """Undirected base edge; the potential is oriented from u to v."""

    model_config = ConfigDict(frozen=True)

    u: int
    v: int
    length: float = Field(gt=0)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)


class QuantumGraphSpec(BaseModel):
    """Finite quantum graph (V, E, L, W, alpha) used as a base for universal covers."""

    model_config = ConfigDict(frozen=True)

    vertices: list[int]
    edges: list[EdgeSpec]
    couplings: dict[int, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self) -> "QuantumGraphSpec":
        known = set(self.vertices)
        if len(known) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        seen: set[frozenset] = set()
        for edge in self.edges:
            if edge.u == edge.v:
                raise ValueError(f"self-loop at vertex {edge.u}")
            if edge.u not in known or edge.v not in known:
                raise ValueError(f"edge ({edge.u}, {edge.v}) references unknown vertex")
            key = frozenset((edge.u, edge.v))
            if key in seen:
                raise ValueError(f"multiple edges between {edge.u} and {edge.v}")
            seen.add(key)
        unknown = set(self.couplings) - known
        if unknown:
            raise ValueError(f"couplings given for unknown vertices {sorted(unknown)}")
        if self.vertices and not nx.is_connected(self.to_networkx()):
            raise ValueError("quantum graph must be connected")
        return self

    def coupling(self, vertex: int) -> float:
        return float(self.couplings.get(vertex, 0.0))

    def to_networkx(self) -> nx.Graph:
        """Export as an undirected networkx graph with edge attributes."""
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        for edge in self.edges:
            graph.add_edge(edge.u, edge.v, length=edge.length, potential=edge.potential, tail=edge.u)
        return graph

    def degree(self, vertex: int) -> int:
        return sum(1 for e in self.edges if vertex in (e.u, e.v))

    def is_equilateral(self) -> bool:
        return len({e.length for e in self.edges}) <= 1

    @classmethod
    def equilateral(
        cls,
        graph: nx.Graph,
        length: float = 1.0,
        alpha: float = 0.0,
        potential: Optional[PotentialSpec] = None,
    ) -> "QuantumGraphSpec":
        """Build a spec with equal lengths, couplings and potentials on a networkx graph."""
        mapping = {node: i for i, node in enumerate(graph.nodes())}
        potential = potential or PotentialSpec()
        return cls(
            vertices=list(mapping.values()),
            edges=[
                EdgeSpec(u=mapping[a], v=mapping[b], length=length, potential=potential)
                for a, b in graph.edges()
            ],
            couplings={i: alpha for i in mapping.values()},
        )


class ConeSystem(BaseModel):
    """Finite cone-type data: labels 0..m-1, child matrix M and per-label (L, W, alpha).

    Labels are 0-based in the API and 1-based in condition witnesses.
    ``reverse[j]`` is the label of the reversed directed edge when known.
    """

    model_config = ConfigDict(frozen=True)

    matrix: list[list[int]]
    lengths: list[float]
    potentials: list[PotentialSpec]
    couplings: list[float]
    root_label: int = 0
    root_length: Optional[float] = None
    root_potential: Optional[PotentialSpec] = None
    reverse: Optional[list[int]] = None

    @model_validator(mode="after")
    def _check(self) -> "ConeSystem":
        m = len(self.matrix)
        if m == 0:
            raise ValueError("cone system needs at least one label")
        if any(len(row) != m for row in self.matrix):
            raise ValueError("cone matrix must be square")
        if any(entry < 0 for row in self.matrix for entry in row):
            raise ValueError("cone matrix entries must be nonnegative")
        for name in ("lengths", "potentials", "couplings"):
            if len(getattr(self, name)) != m:
                raise ValueError(f"{name} must have one entry per label ({m})")
        if any(not (length > 0) for length in self.lengths):
            raise ValueError("edge lengths must be strictly positive")
        if self.root_length is not None and not (self.root_length > 0):
            raise ValueError("root edge length must be strictly positive")
        if not 0 <= self.root_label < m:
            raise ValueError(f"root label {self.root_label} out of range")
        if self.reverse is not None:
            if len(self.reverse) != m or any(not 0 <= r < m for r in self.reverse):
                raise ValueError("reverse map must send labels to labels")
        return self

    @property
    def size(self) -> int:
        return len(self.matrix)

    def matrix_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=np.int64)

    def row_sums(self) -> np.ndarray:
        return self.matrix_array().sum(axis=1)

    @property
    def edge_length_of_root(self) -> float:
        return self.root_length if self.root_length is not None else self.lengths[self.root_label]

    @property
    def edge_potential_of_root(self) -> PotentialSpec:
        return self.root_potential if self.root_potential is not None else self.potentials[self.root_label]

    def has_potentials(self) -> bool:
        return any(p.variant != "zero" for p in self.potentials)

    def backward_label(self, label: int) -> Optional[int]:
        """Label of the cone seen looking back along a label-``label`` edge."""
        if self.reverse is None:
            return None
        return self.reverse[label]

    @classmethod
    def regular(
        cls,
        q: int,
        length: float = 1.0,
        alpha: float = 0.0,
        potential: Optional[PotentialSpec] = None,
    ) -> "ConeSystem":
        """Equilateral (q+1)-regular tree: one label, M = (q)."""
        potential = potential or PotentialSpec()
        return cls(
            matrix=[[q]],
            lengths=[length],
            potentials=[potential],
            couplings=[alpha],
            reverse=[0] if potential.is_symmetric else None,
        )


class EnsembleConfig(BaseModel):
    """Disorder ensemble for random lengths and couplings around the cone data."""

    model_config = ConfigDict(frozen=True)

    eps: float = Field(default=0.0, ge=0)
    family: DistributionFamily = "uniform"
    beta: float = Field(default=1.0, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    perturb_lengths: bool = True
    perturb_couplings: bool = True
