"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure
(singular position system), 4 ``fit`` stopped at the iteration cap before
the partition stabilized.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .data import (
    PATTERNS, BranchingSnpSpec, PatternSpec, branching_snp_table, dataset_to_csv, generate_pattern,
    pca_fit, pca_project, read_csv, read_snp_table, write_csv,
)
from .energy import DataError
from .grammar import grow
from .graph import GraphError, with_moduli
from .layout import export_json, export_svg, import_json, metro_layout, node_compositions
from .optimizer import OptimizerConfig, SingularSystemError, build_partition, fit
from .pipeline import EpochSpec, LocalNeighborhood, PrincipalSegment, hybrid_preset, initialize, run_epochs
from .serialize import dumps, read_json, write_json, write_jsonl

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_CAPPED = 0, 1, 2, 3, 4

log = logging.getLogger("rpgraph")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return v


def _add_input(p, required=True):
    p.add_argument("--input", "-i", required=required, help="CSV data file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true", help="first row is data")
    p.add_argument("--weight-column", help="weight column (name or 0-based index; default: a column named 'weight')")
    p.add_argument("--label-column", help="label column (name or 0-based index; default: a column named 'label')")


def _add_optimizer(p):
    p.add_argument("--mode", choices=["standard", "robust"], default="standard")
    p.add_argument("--r0", type=_float, default=math.inf, help="robustness radius (robust mode)")
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--ridge", type=_float, default=1e-9)


def _add_moduli(p, required=False):
    p.add_argument("--lambda", dest="lam", type=_float, default=None if not required else 0.01,
                   help="edge stretching modulus")
    p.add_argument("--mu", type=_float, default=None if not required else 0.1,
                   help="star bending modulus")


def _add_growth(p):
    p.add_argument("--max-nodes", type=int, default=20)
    p.add_argument("--trial-iterations", type=int, default=10)
    p.add_argument("--epsilon-improve", type=_float, default=0.0,
                   help="minimum relative energy improvement to commit a grammar step")
    p.add_argument("--jobs", type=int, default=1, help="concurrent candidate trials")


def _add_init(p):
    p.add_argument("--init", choices=["principal-segment", "local"], default="principal-segment")
    p.add_argument("--k-density", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rpgraph", description="Robust elastic principal graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthetic pattern -> CSV (or SNP-like table -> TSV)")
    p.add_argument("--kind", choices=sorted(PATTERNS) + ["snp_branches"], default="spiral")
    p.add_argument("--n", type=int, default=1000, help="points (per branch for snp_branches)")
    p.add_argument("--noise", type=_float, default=0.0, help="fraction of uniform background points")
    p.add_argument("--jitter", type=_float, default=0.02)
    p.add_argument("--bbox", type=_float, nargs=4, default=(-1.2, -1.2, 1.2, 1.2),
                   metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    p.add_argument("--snps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", help="output path (default: stdout)")

    p = sub.add_parser("pca", help="CSV or SNP table -> projected CSV + model JSON")
    _add_input(p)
    p.add_argument("--snp", action="store_true", help="input is a tab-separated genotype table")
    p.add_argument("--components", "-c", type=int, default=3)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--model", help="PCA model JSON path")

    p = sub.add_parser("fit", help="fit node positions of a fixed graph")
    _add_input(p)
    p.add_argument("--graph", "-g", required=True, help="graph JSON with embedding")
    _add_optimizer(p)
    _add_moduli(p)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--trace", help="per-iteration energies, JSON lines")
    p.add_argument("--figure", help="PNG/SVG figure of the fitted graph")

    p = sub.add_parser("grow", help="grow a principal tree by the two-rule grammar")
    _add_input(p)
    _add_optimizer(p)
    _add_moduli(p, required=True)
    _add_growth(p)
    _add_init(p)
    p.add_argument("--start", help="graph JSON to grow from instead of initializing")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--log", help="growth log, JSON lines")
    p.add_argument("--nodes-csv", help="node positions as CSV")
    p.add_argument("--figure", help="PNG/SVG figure of the grown tree")

    p = sub.add_parser("hybrid", help="multi-epoch training (default: coarse standard, then robust)")
    _add_input(p)
    p.add_argument("--config", help="JSON list of epoch specifications")
    p.add_argument("--lambda", dest="lam", type=_float, default=0.01)
    p.add_argument("--mu", type=_float, default=0.1)
    p.add_argument("--r0", type=_float, default=None, help="robust-epoch radius (required without --config)")
    p.add_argument("--reduce-factor", type=_float, default=10.0)
    p.add_argument("--coarse-nodes", type=int, default=10)
    p.add_argument("--fine-nodes", type=int, default=30)
    p.add_argument("--trial-iterations", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    _add_init(p)
    p.add_argument("--out-dir", "-o", required=True)
    p.add_argument("--figures", action="store_true", help="render a PNG per epoch")

    p = sub.add_parser("layout", help="metro-map layout -> SVG/JSON")
    p.add_argument("--graph", "-g", required=True, help="graph JSON with embedding")
    _add_input(p, required=False)
    p.add_argument("--tolerance", type=_float, default=None, help="star-mean tolerance (display units)")
    p.add_argument("--max-rounds", type=int, default=10000)
    p.add_argument("--svg")
    p.add_argument("--json")
    p.add_argument("--figure", help="matplotlib rendering (PNG/SVG)")
    return parser


def _load(args):
    weight, label = args.weight_column, args.label_column
    if not args.no_header and (weight is None or label is None):
        # columns written by `generate` and by dataset_to_csv are picked up by name
        with open(args.input, newline="", encoding="utf-8") as fh:
            header = [c.strip() for c in next(csv.reader(fh, delimiter=args.delimiter), [])]
        if weight is None and "weight" in header:
            weight = "weight"
        if label is None and "label" in header:
            label = "label"
    return read_csv(args.input, delimiter=args.delimiter, has_header=not args.no_header,
                    weight_column=weight, label_column=label)


def _optimizer(args) -> OptimizerConfig:
    r0 = args.r0 if args.mode == "robust" else math.inf
    return OptimizerConfig(args.mode, r0, args.max_iterations, ridge=args.ridge)


def _strategy(args):
    if args.init == "local":
        return LocalNeighborhood(args.seed, args.k_density)
    return PrincipalSegment()


def _cmd_generate(args) -> int:
    if args.kind == "snp_branches":
        table, ids, labels = branching_snp_table(BranchingSnpSpec(per_branch=args.n, n_snps=args.snps,
                                                                  seed=args.seed))
        lines = ["\t".join(["population"] + ids)]
        lines += ["\t".join([lab] + row) for lab, row in zip(labels, table)]
        text = "\n".join(lines) + "\n"
    else:
        spec = PatternSpec(args.kind, args.n, args.noise, args.jitter, tuple(args.bbox), args.seed)
        text = dataset_to_csv(generate_pattern(spec))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_pca(args) -> int:
    if args.snp:
        enc = read_snp_table(args.input, label_column=args.label_column)
        if enc.dropped:
            log.info("dropped %d unreliable SNP columns", len(enc.dropped))
        data = enc.dataset
    else:
        data = _load(args)
    model = pca_fit(data, args.components)
    write_csv(pca_project(model, data), args.out)
    if args.model:
        write_json(args.model, model.to_dict())
    return EXIT_OK


def _cmd_fit(args) -> int:
    data = _load(args)
    graph, emb = import_json(read_json(args.graph))
    if args.lam is not None or args.mu is not None:
        lam = args.lam if args.lam is not None else (graph.edges[0].lam if graph.edges else 1.0)
        mu = args.mu if args.mu is not None else (graph.stars[0].mu if graph.stars else 1.0)
        graph = with_moduli(graph, lam, mu)
    config = _optimizer(args)
    emb, part, trace = fit(graph, data, emb, config)
    comps = node_compositions(data, part, graph.nodes) if data.labels is not None else None
    write_json(args.out, export_json(graph, emb, compositions=comps))
    if args.trace:
        write_jsonl(args.trace, trace.records())
    if args.figure:
        from .plotting import plot_fit
        plot_fit(data, graph, emb, args.figure)
    if not trace.converged:
        print(f"rpgraph: fit reached {config.max_iterations} iterations without a stable partition",
              file=sys.stderr)
        return EXIT_CAPPED
    return EXIT_OK


def _cmd_grow(args) -> int:
    data = _load(args)
    config = _optimizer(args)
    if args.start:
        graph, emb = import_json(read_json(args.start))
        graph = with_moduli(graph, args.lam, args.mu)
    else:
        graph, emb = initialize(data, _strategy(args), args.lam, args.mu)
    spec = EpochSpec(config.mode, args.lam, args.mu, config.r0, args.max_nodes, args.trial_iterations,
                     args.epsilon_improve, config.max_iterations, config.ridge)
    graph, emb, history = grow(data, graph, emb, spec.growth(args.jobs))
    part = build_partition(data, emb, config.r0)
    comps = node_compositions(data, part, graph.nodes) if data.labels is not None else None
    write_json(args.out, export_json(graph, emb, compositions=comps))
    if args.log:
        write_jsonl(args.log, history)
    if args.nodes_csv:
        _write_nodes_csv(args.nodes_csv, emb)
    if args.figure:
        from .plotting import plot_fit
        plot_fit(data, graph, emb, args.figure)
    return EXIT_OK


def _write_nodes_csv(path, emb) -> None:
    rows = ["id," + ",".join(f"x{j}" for j in range(emb.dim))]
    for n, p in zip(emb.node_ids, emb.positions):
        rows.append(f"{n}," + ",".join(format(float(v), ".17g") for v in p))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def _cmd_hybrid(args) -> int:
    if not args.config and args.r0 is None:
        raise _UsageError("hybrid needs --r0 (or --config)")
    data = _load(args)
    if args.config:
        doc = read_json(args.config)
        if not isinstance(doc, list):
            raise DataError("epoch config must be a JSON list of epoch objects")
        epochs = [EpochSpec.from_dict(d) for d in doc]
    else:
        epochs = hybrid_preset(args.lam, args.mu, args.r0, args.coarse_nodes, args.fine_nodes,
                               args.reduce_factor, args.trial_iterations)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "epochs.json", [e.to_dict() for e in epochs])
    _, _, results = run_epochs(data, epochs, _strategy(args), jobs=args.jobs)
    for i, res in enumerate(results, 1):
        part = build_partition(data, res.embedding, res.spec.r0)
        comps = node_compositions(data, part, res.graph.nodes) if data.labels is not None else None
        write_json(out / f"epoch_{i}.json", export_json(res.graph, res.embedding, compositions=comps))
        write_jsonl(out / f"epoch_{i}_log.jsonl", res.records)
        _write_nodes_csv(out / f"epoch_{i}_nodes.csv", res.embedding)
        if args.figures:
            from .plotting import plot_fit
            plot_fit(data, res.graph, res.embedding, out / f"epoch_{i}.png",
                     title=f"epoch {i}: {res.spec.mode}")
    return EXIT_OK


def _cmd_layout(args) -> int:
    graph, emb = import_json(read_json(args.graph))
    lay = metro_layout(graph, emb, args.tolerance, args.max_rounds)
    comps = None
    if args.input:
        data = _load(args)
        if data.labels is not None:
            comps = node_compositions(data, build_partition(data, emb), graph.nodes)
    if not (args.svg or args.json or args.figure):
        sys.stdout.write(dumps(export_json(graph, emb, lay, comps)) + "\n")
    if args.svg:
        Path(args.svg).write_text(export_svg(lay, graph, comps), encoding="utf-8")
    if args.json:
        write_json(args.json, export_json(graph, emb, lay, comps))
    if args.figure:
        from .plotting import plot_layout
        plot_layout(lay, graph, args.figure, comps)
    return EXIT_OK


class _UsageError(Exception):
    pass


COMMANDS = {
    "generate": _cmd_generate, "pca": _cmd_pca, "fit": _cmd_fit, "grow": _cmd_grow,
    "hybrid": _cmd_hybrid, "layout": _cmd_layout,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"rpgraph: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SingularSystemError as exc:
        print(f"rpgraph: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, GraphError, ValueError, OSError, KeyError) as exc:
        print(f"rpgraph: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
