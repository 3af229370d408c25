"""qtree command-line front end.

Every command writes a CSV and ``<output>.manifest.json``. Exit codes:
0 success, 1 I/O or parse failure, 2 mathematical precondition failure.
"""

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src.cli.io import load_graph, load_system, parse_energies, read_csv, write_csv
from src.cli.manifest import record_run
from src.common.errors import ConditionViolation, DirichletProximityError, HerglotzViolation
from src.common.models import EnsembleConfig, QuantumGraphSpec
from src.common.settings import Settings
from src.cone.bands import detect_bands
from src.graph.core import is_hamiltonian, require_conditions
from src.graph.tree import ORIGIN, expand_truncated_tree
from src.green.engine import BoundaryRule, WTState, green_diag, wt_recursion
from src.green.identities import identity_suite
from src.oracle.discretize import oracle_green
from src.oracle.reduction import reduction_zeros
from src.oracle.star import star_bottom
from src.perturb.lab import collect_samples, f_distribution, gamma_statistics, moment_row

logging.basicConfig(
    level=logging.INFO,
    format="[qtree] %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_MATH = 2

# flags that do not change outputs and stay out of manifests
_AMBIENT = ("command", "func", "parser", "log_level", "workers")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the I/O code rather than argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _split(prefix: str, value: complex) -> dict[str, float]:
    value = complex(value)
    return {f"{prefix}_re": float(value.real), f"{prefix}_im": float(value.imag)}


def _flags(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _AMBIENT}


def _energy_grid(args: argparse.Namespace) -> np.ndarray:
    if args.grid < 1 or args.lmax < args.lmin or (args.grid > 1 and args.lmax == args.lmin):
        raise ValueError(f"empty grid: --lmin {args.lmin} --lmax {args.lmax} --grid {args.grid}")
    return np.linspace(args.lmin, args.lmax, args.grid)


def cmd_spectrum(args: argparse.Namespace, settings: Settings) -> int:
    try:
        grid = _energy_grid(args)
    except ValueError as exc:
        args.parser.print_usage(sys.stderr)
        logger.error(str(exc))
        return EXIT_IO
    started = time.perf_counter()
    system, _ = load_system(args.graph)
    require_conditions(system, ("C0", "C1*"))
    report = detect_bands(system, grid, im_threshold=args.threshold, refine=not args.no_refine, workers=args.workers)

    labels = range(system.size)
    fields = ["lam", "status", "eta_final", "band_id", "im_green"]
    fields += [f"im_h_{j + 1}" for j in labels] + [f"im_r_plus_{j + 1}" for j in labels]
    rows = []
    for row in report.rows:
        out = row.model_dump(include={"lam", "status", "eta_final", "band_id", "im_green"})
        out.update({f"im_h_{j + 1}": v for j, v in enumerate(row.im_h)})
        out.update({f"im_r_plus_{j + 1}": v for j, v in enumerate(row.im_r_plus)})
        rows.append(out)
    output = write_csv(args.output, fields, rows)
    bands_path = write_csv(
        f"{args.output}.bands.csv",
        ["band_id", "lo", "hi"],
        [{"band_id": i, "lo": lo, "hi": hi} for i, (lo, hi) in enumerate(report.bands)],
    )
    for lo, hi in report.bands:
        print(f"band [{lo:.10g}, {hi:.10g}]")
    if report.exceptional:
        logger.warning(f"Exceptional points: {', '.join(f'{lam:g}' for lam in report.exceptional)}")
    if report.dirichlet:
        logger.info(f"Skipped {len(report.dirichlet)} grid points inside the Dirichlet guard")
    record_run("spectrum", _flags(args), [args.graph], [output, bands_path], started)
    return EXIT_OK


def _boundary(kind: str, system, z) -> BoundaryRule:
    return BoundaryRule.cone(system, z) if kind == "cone" else BoundaryRule(kind=kind)


def cmd_green(args: argparse.Namespace, settings: Settings) -> int:
    started = time.perf_counter()
    system, _ = load_system(args.graph)
    tree = expand_truncated_tree(system, args.depth)
    fields = ["lam", "eta", "node", "parent", "depth", "label"]
    for name in ("r_plus", "r_minus", "zeta", "zeta_hat", "green"):
        fields += [f"{name}_re", f"{name}_im"]
    fields.append("pole")

    rows = []
    for energy in parse_energies(args.z):
        state = wt_recursion(tree, energy, _boundary(args.boundary, system, energy))
        nodes = args.vertices if args.vertices else [ORIGIN, *range(tree.size)]
        for node in nodes:
            value = green_diag(state, node)
            row = {"lam": energy.lam, "eta": energy.eta, "node": node, "pole": value.pole, **_split("green", value.value)}
            if node != ORIGIN:
                row.update(
                    parent=int(tree.parent[node]),
                    depth=int(tree.depth[node]),
                    label=int(tree.label[node]) + 1,
                    **_split("r_plus", state.r_plus_origin[node]),
                    **_split("r_minus", state.r_minus_terminus[node]),
                    **_split("zeta", state.zeta[node]),
                    **_split("zeta_hat", state.zeta_hat[node]),
                )
            rows.append(row)
    output = write_csv(args.output, fields, rows)
    record_run("green", _flags(args), [args.graph], [output], started)
    return EXIT_OK


def _sweep_lams(args: argparse.Namespace) -> list[float]:
    if args.lam:
        return list(args.lam)
    if args.from_spectrum:
        bands = read_csv(args.from_spectrum)
        if not bands:
            raise ValueError(f"{args.from_spectrum}: no bands to sample")
        return [0.5 * (float(b["lo"]) + float(b["hi"])) for b in bands]
    raise ValueError("give --lam or --from-spectrum")


def cmd_perturb(args: argparse.Namespace, settings: Settings) -> int:
    started = time.perf_counter()
    system, _ = load_system(args.graph)
    lams = _sweep_lams(args)
    x_grid = np.geomspace(args.x_min, args.x_max, args.x_points)

    rows = []
    for eps in sorted(args.eps):
        config = EnsembleConfig(eps=eps, family=args.family, beta=args.beta, seed=args.seed)
        for lam in lams:
            for eta in args.eta:
                batch = collect_samples(
                    system, config, complex(lam, eta), args.depth, args.samples, workers=args.workers
                )
                stats = gamma_statistics(system, config, batch.z, p=args.moment, batch=batch)
                moments = moment_row(batch, args.s, args.moment, args.boot, args.seed)
                tail = f_distribution(system, config, batch.z, x_grid, batch=batch)
                worst = max(stats.labels, key=lambda m: m.mean_gamma)
                rows.append(
                    {
                        "lam": lam,
                        "eta": eta,
                        "eps": eps,
                        "p": args.moment,
                        "estimate": stats.max_gamma_moment,
                        "stderr": worst.stderr_gamma,
                        "abs_diff_moment": worst.mean_abs_diff,
                        "inverse_moment": moments.inverse_moment,
                        "ci_low": moments.ci_low,
                        "ci_high": moments.ci_high,
                        "chain_holds": moments.chain_holds,
                        "f_kappa": tail.kappa,
                        "euclidean_violations": stats.euclidean_violations,
                    }
                )

    # gamma moments are expected to grow with eps at fixed energy
    for lam in lams:
        for eta in args.eta:
            group = [r for r in rows if r["lam"] == lam and r["eta"] == eta]
            values = [r["estimate"] for r in group]
            monotone = all(b >= a for a, b in zip(values, values[1:]))
            for r in group:
                r["monotone"] = monotone

    fields = [
        "lam", "eta", "eps", "p", "estimate", "stderr", "abs_diff_moment", "inverse_moment",
        "ci_low", "ci_high", "chain_holds", "f_kappa", "euclidean_violations", "monotone",
    ]
    output = write_csv(args.output, fields, rows)
    inputs = [args.graph] + ([args.from_spectrum] if args.from_spectrum else [])
    record_run("perturb", _flags(args), inputs, [output], started, seed=args.seed)
    return EXIT_OK


def _corrupt(state: WTState) -> WTState:
    zeta = state.zeta.copy()
    zeta[0] *= 1.0 + 1e-3
    return dataclasses.replace(state, zeta=zeta)


def _identity_rows(state: WTState, args: argparse.Namespace) -> tuple[list[dict], bool]:
    report = identity_suite(state, tol=args.tol, slack_tol=args.slack_tol)
    for failure in report.failures():
        logger.error(f"Identity {failure.name} fails at z={state.z}: residual {failure.residual:.3e}")
    rows = [
        {"lam": report.lam, "eta": report.eta, **result.model_dump(include={"name", "kind", "residual", "tolerance", "passed", "checked"})}
        for result in report.results
    ]
    return rows, report.passed


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    started = time.perf_counter()
    inputs: list = []
    states: list[WTState] = []
    failed = False
    if args.replay:
        inputs.append(args.replay)
        states.append(WTState.from_json(Path(args.replay).read_text()))
    else:
        if not args.graph or not args.z:
            raise ValueError("verify needs --graph and --z, or --replay")
        inputs.append(args.graph)
        system, _ = load_system(args.graph)
        tree = expand_truncated_tree(system, args.depth)
        for i, energy in enumerate(parse_energies(args.z)):
            boundary = _boundary(args.boundary, system, energy)
            try:
                states.append(wt_recursion(tree, energy, boundary))
            except HerglotzViolation as exc:
                state = wt_recursion(tree, energy, boundary, check_herglotz=False)
                replay = Path(f"{args.output}.replay-{i}.json")
                replay.write_text(state.to_json())
                logger.error(f"{exc}; case serialized to {replay}")
                failed = True

    rows = []
    for state in states:
        if args.corrupt_zeta:
            state = _corrupt(state)
        state_rows, passed = _identity_rows(state, args)
        rows.extend(state_rows)
        failed = failed or not passed

    fields = ["lam", "eta", "name", "kind", "residual", "tolerance", "passed", "checked"]
    output = write_csv(args.output, fields, rows)
    record_run("verify", _flags(args), inputs, [output], started)
    return EXIT_MATH if failed else EXIT_OK


def cmd_oracle(args: argparse.Namespace, settings: Settings) -> int:
    started = time.perf_counter()
    inputs = [args.graph] if args.graph else []
    if args.star:
        if not args.lengths:
            raise ValueError("--star needs --lengths")
        result = star_bottom(args.lengths, alpha=args.alpha)
        print(f"E0 = {result.e0:.15g}")
        fields = ["degree", "alpha", "e0", "dirichlet_bottom", "bracket_evaluations"]
        rows = [
            {
                "degree": len(args.lengths),
                "alpha": args.alpha,
                "e0": result.e0,
                "dirichlet_bottom": result.dirichlet_bottom,
                "bracket_evaluations": len(result.trace),
            }
        ]
    elif args.reduction:
        graph = load_graph(args.graph) if args.graph else None
        if not isinstance(graph, QuantumGraphSpec):
            raise ValueError("--reduction needs a finite base graph (vertices and edges)")
        zeros = reduction_zeros(graph, args.lmin, args.lmax)
        hamiltonian = is_hamiltonian(graph.to_networkx())
        fields = ["lam", "multiplicity", "is_hamiltonian"]
        rows = [{"lam": z.lam, "multiplicity": z.multiplicity, "is_hamiltonian": hamiltonian} for z in zeros]
    else:
        if not args.graph or not args.z:
            raise ValueError("the tree comparison needs --graph and --z")
        system, _ = load_system(args.graph)
        tree = expand_truncated_tree(system, args.depth)
        fields = ["lam", "eta", "node", "oracle_re", "oracle_im", "recursion_re", "recursion_im", "abs_diff", "refinement_gap"]
        rows = []
        for energy in parse_energies(args.z):
            reference = oracle_green(tree, energy, step=args.step)
            state = wt_recursion(tree, energy, BoundaryRule(kind="dirichlet"))
            for node, value in zip(reference.vertices, reference.values):
                recursion = state.green_at(int(node))
                rows.append(
                    {
                        "lam": energy.lam,
                        "eta": energy.eta,
                        "node": int(node),
                        **_split("oracle", value),
                        **_split("recursion", recursion),
                        "abs_diff": float(abs(value - recursion)),
                        "refinement_gap": reference.refinement_gap,
                    }
                )
    output = write_csv(args.output, fields, rows)
    record_run("oracle", _flags(args), inputs, [output], started)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--workers", type=int, default=None, help="Worker processes (default: QTREE_WORKERS or CPU count)")
    common.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = _Parser(prog="qtree", description="Spectra and Green functions of quantum trees of finite cone type")
    commands = parser.add_subparsers(dest="command", required=True)

    spectrum = commands.add_parser("spectrum", parents=[common], help="Scan for AC bands")
    spectrum.add_argument("--graph", required=True)
    spectrum.add_argument("--lmin", type=float, required=True)
    spectrum.add_argument("--lmax", type=float, required=True)
    spectrum.add_argument("--grid", type=int, required=True)
    spectrum.add_argument("--threshold", type=float, default=1e-6)
    spectrum.add_argument("--no-refine", action="store_true")
    spectrum.add_argument("--output", default="spectrum.csv")
    spectrum.set_defaults(func=cmd_spectrum, parser=spectrum)

    green = commands.add_parser("green", parents=[common], help="WT functions and diagonal Green values on a truncated tree")
    green.add_argument("--graph", required=True)
    green.add_argument("--z", nargs="+", required=True, help='Energies such as "3+0.5i"')
    green.add_argument("--depth", type=int, default=8)
    green.add_argument("--boundary", choices=["free", "dirichlet", "neumann", "cone"], default="free")
    green.add_argument("--vertices", type=int, nargs="*", default=None, help="Nodes to report (-1 is the origin)")
    green.add_argument("--output", default="green.csv")
    green.set_defaults(func=cmd_green)

    perturb = commands.add_parser("perturb", parents=[common], help="Monte Carlo moments over random trees")
    perturb.add_argument("--graph", required=True)
    perturb.add_argument("--lam", type=float, nargs="*", default=None)
    perturb.add_argument("--from-spectrum", default=None, help="Bands CSV from a spectrum run; samples each band midpoint")
    perturb.add_argument("--eta", type=float, nargs="+", default=[0.1])
    perturb.add_argument("--eps", type=float, nargs="+", required=True)
    perturb.add_argument("--family", choices=["uniform", "two_point", "beta"], default="uniform")
    perturb.add_argument("--beta", type=float, default=1.0)
    perturb.add_argument("--samples", type=int, default=1000)
    perturb.add_argument("--depth", type=int, default=8)
    perturb.add_argument("--seed", type=int, default=0)
    perturb.add_argument("--moment", type=float, default=2.0)
    perturb.add_argument("--s", type=float, default=2.0)
    perturb.add_argument("--boot", type=int, default=1000)
    perturb.add_argument("--x-min", type=float, default=1e-4)
    perturb.add_argument("--x-max", type=float, default=10.0)
    perturb.add_argument("--x-points", type=int, default=26)
    perturb.add_argument("--output", default="perturb.csv")
    perturb.set_defaults(func=cmd_perturb)

    verify = commands.add_parser("verify", parents=[common], help="Check WT identities on truncated trees")
    verify.add_argument("--graph", default=None)
    verify.add_argument("--z", nargs="*", default=None)
    verify.add_argument("--depth", type=int, default=8)
    verify.add_argument("--boundary", choices=["free", "dirichlet", "neumann", "cone"], default="free")
    verify.add_argument("--tol", type=float, default=1e-8)
    verify.add_argument("--slack-tol", type=float, default=1e-10)
    verify.add_argument("--replay", default=None, help="Serialized WTState to re-check")
    verify.add_argument("--corrupt-zeta", action="store_true", help="Perturb zeta on the root edge before checking")
    verify.add_argument("--output", default="verify.csv")
    verify.set_defaults(func=cmd_verify)

    oracle = commands.add_parser("oracle", parents=[common], help="Independent reference computations")
    mode = oracle.add_mutually_exclusive_group()
    mode.add_argument("--star", action="store_true", help="Star-graph ground state")
    mode.add_argument("--reduction", action="store_true", help="Vertex-reduction eigenvalues of a base graph")
    oracle.add_argument("--graph", default=None)
    oracle.add_argument("--lengths", type=float, nargs="*", default=None)
    oracle.add_argument("--alpha", type=float, default=0.0)
    oracle.add_argument("--lmin", type=float, default=0.0)
    oracle.add_argument("--lmax", type=float, default=40.0)
    oracle.add_argument("--z", nargs="*", default=None)
    oracle.add_argument("--depth", type=int, default=4)
    oracle.add_argument("--step", type=float, default=None)
    oracle.add_argument("--output", default="oracle.csv")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one command, mapping failures to exit codes."""
    args = build_parser().parse_args(argv)
    settings = Settings.from_env()
    logging.getLogger().setLevel(args.log_level or settings.log_level)
    if args.workers is None:
        args.workers = settings.workers
    try:
        return args.func(args, settings)
    except ConditionViolation as exc:
        logger.error(str(exc))
        print(f"witness: {exc.witness}")
        return EXIT_MATH
    except (DirichletProximityError, HerglotzViolation) as exc:
        logger.error(str(exc))
        return EXIT_MATH
    except (OSError, ValidationError, json.JSONDecodeError, ValueError) as exc:
        logger.error(str(exc))
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
