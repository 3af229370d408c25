"""Random lengths and couplings on truncated trees, drawn per vertex from a counter-based stream.

Every vertex owns a 64-bit key derived from its root-to-vertex path
(sibling rank and label at each step). Variates are a pure function of
(seed, sample, stream, key), so disjoint subtrees are independent, equal
labels share a distribution, and deepening a tree never changes the draws
at shallower vertices.
"""

import hashlib
import logging
from typing import Optional

import numpy as np
from scipy.stats import beta as beta_distribution

from src.common.models import ConeSystem, EnsembleConfig
from src.graph.tree import TruncatedQuantumTree, expand_truncated_tree

logger = logging.getLogger(__name__)

KEY_BYTES = 8
LENGTH_STREAM = 0
COUPLING_STREAM = 1

_ROOT_DIGEST = hashlib.blake2b(b"root", digest_size=KEY_BYTES).digest()
ORIGIN_KEY = np.uint64(int.from_bytes(hashlib.blake2b(b"origin", digest_size=KEY_BYTES).digest(), "little"))

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x):
    """splitmix64 finaliser on uint64 scalars or arrays (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def path_keys(tree: TruncatedQuantumTree) -> np.ndarray:
    """Per-node uint64 keys hashed along the root-to-node path, cached on the tree."""
    cached = tree._path_keys.get("keys")
    if cached is not None and len(cached) == tree.size:
        return cached
    digests: list[bytes] = [b""] * tree.size
    digests[0] = _ROOT_DIGEST
    for node in range(1, tree.size):
        step = int(tree.rank[node]).to_bytes(4, "little") + int(tree.label[node]).to_bytes(4, "little")
        digests[node] = hashlib.blake2b(digests[int(tree.parent[node])] + step, digest_size=KEY_BYTES).digest()
    keys = np.array([int.from_bytes(d, "little") for d in digests], dtype=np.uint64)
    tree._path_keys["keys"] = keys
    return keys


def uniform_variates(keys, seed: int, sample: int, stream: int) -> np.ndarray:
    """U[0, 1) variates with 53 random bits, one per key."""
    base = splitmix64(splitmix64(np.uint64(seed)) ^ np.uint64(sample))
    with np.errstate(over="ignore"):
        stream_key = splitmix64(base + np.uint64(stream))
    mixed = splitmix64(np.asarray(keys, dtype=np.uint64) ^ stream_key)
    return (mixed >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _unit_draws(u: np.ndarray, config: EnsembleConfig) -> np.ndarray:
    """Map uniforms to the configured shape on [0, 1]."""
    if config.family == "uniform":
        return u
    if config.family == "two_point":
        return (u >= 0.5).astype(float)
    return beta_distribution.ppf(u, config.beta, config.beta)


def draw_parameters(
    nominal_length: np.ndarray,
    nominal_alpha: np.ndarray,
    keys: np.ndarray,
    config: EnsembleConfig,
    sample: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Lengths on [L - eps, L + eps] and couplings on [max(0, alpha - eps), alpha + eps]."""
    nominal_length = np.asarray(nominal_length, dtype=float)
    nominal_alpha = np.asarray(nominal_alpha, dtype=float)
    eps = config.eps
    length = nominal_length.copy()
    alpha = nominal_alpha.copy()
    if eps == 0:
        return length, alpha
    if config.perturb_lengths:
        t = _unit_draws(uniform_variates(keys, config.seed, sample, LENGTH_STREAM), config)
        length = (nominal_length - eps) + 2.0 * eps * t
    if config.perturb_couplings:
        t = _unit_draws(uniform_variates(keys, config.seed, sample, COUPLING_STREAM), config)
        lo = np.maximum(0.0, nominal_alpha - eps)
        alpha = lo + (nominal_alpha + eps - lo) * t
    return length, alpha


def check_ensemble(system: ConeSystem, config: EnsembleConfig) -> None:
    """Raise ValueError if the ensemble does not fit the system."""
    if system.has_potentials() or system.edge_potential_of_root.variant != "zero":
        raise ValueError("random length and coupling ensembles need edges without potentials")
    shortest = min(min(system.lengths), system.edge_length_of_root)
    if config.eps >= shortest:
        raise ValueError(f"eps={config.eps} must be smaller than the shortest edge length {shortest}")


def sample_random_tree(
    system: ConeSystem,
    config: EnsembleConfig,
    depth: int,
    sample: int = 0,
    base: Optional[TruncatedQuantumTree] = None,
) -> TruncatedQuantumTree:
    """One realisation of the random tree, truncated at ``depth``.

    Args:
        system: Unperturbed cone system without edge potentials
        config: Disorder half-width, distribution family and seed
        depth: Generations below t_{b_o}
        sample: Sample index; distinct indices give independent trees
        base: Pre-expanded unperturbed tree to reuse

    Returns:
        Tree with the combinatorics of ``base`` and random edge data
    """
    check_ensemble(system, config)
    tree = base if base is not None else expand_truncated_tree(system, depth)
    if config.eps == 0:
        return tree
    keys = path_keys(tree)
    length, alpha = draw_parameters(tree.length, tree.alpha, keys, config, sample)
    _, origin = draw_parameters(
        np.ones(1), np.array([tree.origin_alpha]), np.array([ORIGIN_KEY]), config, sample
    )
    return tree.with_parameters(length, alpha, origin_alpha=float(origin[0]))
