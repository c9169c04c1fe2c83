"""Command-line surface.

Every command writes plot-ready text (CSV/TSV/Newick) with a metadata
header recording the exact command line, the seed, and the package
version, so identical invocations give identical files.  Exit codes:
0 ok, 2 malformed input, 3 numerical/domain failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dmatrix import DistanceMatrix
from .embedding import classical_mds, kernel_transform
from .errors import DomainError, ParseError, TreespaceError, ValidationError
from .geodesic import boundary_trees, distance_matrix, geodesic
from .hyperbolicity import NORMALIZATIONS, gromov_delta
from .inference import (anneal_to_boundary, bin_topologies, bootstrap_trees,
                        shannon_diversity)
from .newick import parse_alignment, parse_newick, parse_trees, write_newick
from .simulate import EvolutionModel, evolve, make_tree, random_tree
from .treebuild import cut_dendrogram, single_linkage
from .inference import estimate_tree


def _default_jobs() -> int:
    return int(os.environ.get("TREESPACE_JOBS", "1"))


def _header(args: argparse.Namespace) -> list[str]:
    lines = [f"treespace {__version__}", "command: " + " ".join(sys.argv[1:])]
    if getattr(args, "seed", None) is not None:
        lines.append(f"seed: {args.seed}")
    return lines


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _comment(lines: list[str]) -> str:
    return "".join(f"# {ln}\n" for ln in lines)


def cmd_dist(args) -> int:
    t1 = parse_newick(_read(args.tree1), collapse_zero=args.collapse_zero)
    t2 = parse_newick(_read(args.tree2), collapse_zero=args.collapse_zero)
    path = geodesic(t1, t2)
    print(f"{path.distance!r}")
    if args.path:
        for anchor, pairs in path.bins:
            for k, pair in enumerate(pairs):
                drops = ",".join("{" + " ".join(s.leaves()) + "}" for s in pair.a)
                adds = ",".join("{" + " ".join(s.leaves()) + "}" for s in pair.b)
                print(f"bin {anchor:x} pair {k}: drop {drops} add {adds} "
                      f"ratio {pair.ratio:.6g}")
        for mask, w1, w2 in path.shared_deltas:
            if w1 != w2:
                print(f"shared {mask:x}: {w1!r} -> {w2!r}")
    if args.boundary:
        for b in boundary_trees(path):
            print(write_newick(b))
    return 0


def cmd_matrix(args) -> int:
    trees = parse_trees(_read(args.trees), collapse_zero=args.collapse_zero)
    t0 = time.perf_counter()
    dm = distance_matrix(trees, jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    print(f"{len(trees)} trees, {len(trees) * (len(trees) - 1) // 2} pairs "
          f"in {elapsed:.1f}s", file=sys.stderr)
    _write(args.out, dm.to_csv(_header(args)))
    return 0


def cmd_delta(args) -> int:
    dm = DistanceMatrix.from_csv(_read(args.matrix))
    rep = gromov_delta(dm, args.norm)
    out = [f"delta: {rep.delta!r}",
           f"normalization: {rep.normalization}",
           f"ratio: {rep.ratio!r}",
           "argmax_quadruple: " + ",".join(rep.argmax_quadruple)]
    _write(args.out, _comment(_header(args)) + "\n".join(out) + "\n")
    return 0


def cmd_mds(args) -> int:
    dm = DistanceMatrix.from_csv(_read(args.matrix))
    if args.kernel is not None:
        dm = kernel_transform(dm, args.kernel)
    res = classical_mds(dm, args.k)
    lines = _header(args)
    lines.append("eigenvalues: " + ",".join(repr(float(v)) for v in res.eigenvalues))
    lines.append(f"stress: {res.stress!r}")
    lines.append(f"negative_mass: {res.negative_mass!r}")
    lines.append("explained: " + ",".join(f"{v:.6g}" for v in res.explained[:args.k]))
    if res.padded:
        lines.append("warning: fewer positive eigenvalues than requested "
                     "dimensions; zero columns appended")
    rows = [_comment(lines)]
    rows.append(",".join(["label"] + [f"x{i + 1}" for i in range(args.k)]) + "\n")
    for lab, row in zip(res.labels, res.coordinates):
        rows.append(lab + "," + ",".join(repr(float(x)) for x in row) + "\n")
    _write(args.out, "".join(rows))
    return 0


def cmd_bootstrap(args) -> int:
    aln = parse_alignment(_read(args.alignment), format=args.format)
    trees = bootstrap_trees(aln, args.replicates, args.estimator, args.dist,
                            args.seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    head = _comment(_header(args))
    (outdir / "trees.nwk").write_text(
        head + "".join(write_newick(t) + "\n" for t in trees))
    bins = bin_topologies(trees)
    sw = shannon_diversity(bins)
    rows = [head, "rank\tcount\tkey\n"]
    for rank, (key, count) in enumerate(bins.bins, start=1):
        rows.append(f"{rank}\t{count}\t{bins.key_string(key)}\n")
    (outdir / "bins.tsv").write_text("".join(rows))
    (outdir / "diversity.txt").write_text(
        head + f"bins: {len(bins.bins)}\ntrees: {bins.total}\n"
        f"shannon: {sw!r}\n")
    dm = distance_matrix(trees, jobs=args.jobs)
    (outdir / "matrix.csv").write_text(dm.to_csv(_header(args)))
    print(f"{len(bins.bins)} topologies over {bins.total} replicates, "
          f"diversity {sw:.3f}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    head = _comment(_header(args))
    if args.shape == "random":
        truth = random_tree(args.leaves, args.seed)
    else:
        truth = make_tree(args.shape, args.leaves, args.edge_len,
                          outgroup=args.outgroup)
    model = EvolutionModel(args.model, args.alpha)
    if args.rates:
        lo, hi, k = args.rates
        rates = np.linspace(lo, hi, int(k))
        trees_out = [head]
        for r_i, rate in enumerate(rates):
            for rep in range(args.reps):
                aln = evolve(truth, EvolutionModel(args.model, float(rate)),
                             args.length, seed=args.seed + 1000 * r_i + rep)
                est = estimate_tree(aln, "nj", args.dist)
                trees_out.append(f"[rate={rate:g} rep={rep}] "
                                 + write_newick(est) + "\n")
        (outdir / "sweep_trees.nwk").write_text("".join(trees_out))
    else:
        aln = evolve(truth, model, args.length, args.seed)
        (outdir / "alignment.fasta").write_text(aln.to_fasta())
    (outdir / "truth.nwk").write_text(head + write_newick(truth) + "\n")
    return 0


def cmd_anneal(args) -> int:
    aln = parse_alignment(_read(args.alignment), format=args.format)
    target = parse_newick(_read(args.target))
    res = anneal_to_boundary(aln, target, args.estimator, args.dist,
                             (args.t0, args.cooling, args.iters), args.seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    head = _comment(_header(args))
    (outdir / "weights.csv").write_text(
        head + "column,weight\n"
        + "".join(f"{i},{w}\n" for i, w in enumerate(res.weights)))
    (outdir / "trace.csv").write_text(
        head + "iteration,temperature,distance,accepted\n"
        + "".join(f"{k},{t!r},{d!r},{int(acc)}\n" for k, t, d, acc in res.trace))
    (outdir / "final.nwk").write_text(head + write_newick(res.tree) + "\n")
    print(f"distance {res.initial_distance:.6g} -> {res.distance:.6g} "
          f"over {len(res.trace) - 1} iterations", file=sys.stderr)
    return 0


def cmd_hclust(args) -> int:
    dm = DistanceMatrix.from_csv(_read(args.matrix))
    if args.linkage != "single":
        raise DomainError(f"unsupported linkage {args.linkage!r}")
    dendro = single_linkage(dm)
    out = _comment(_header(args)) + dendro.to_newick() + "\n"
    _write(args.out, out)
    if args.cut:
        assign = cut_dendrogram(dendro, args.cut)
        text = _comment(_header(args)) + "label\tcluster\n" + "".join(
            f"{lab}\t{c}\n" for lab, c in zip(dendro.labels, assign))
        _write(args.cut_out, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="treespace",
        description="Geodesic tree distances and the analyses built on them")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="geodesic distance between two trees")
    p.add_argument("tree1")
    p.add_argument("tree2")
    p.add_argument("--path", action="store_true", help="print support pairs")
    p.add_argument("--boundary", action="store_true",
                   help="print boundary trees as Newick")
    p.add_argument("--collapse-zero", action="store_true",
                   help="collapse zero-length internal edges on parse")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("matrix", help="all-pairs distances for a tree file")
    p.add_argument("trees")
    p.add_argument("-o", "--out", default="-")
    p.add_argument("-j", "--jobs", type=int, default=_default_jobs())
    p.add_argument("--collapse-zero", action="store_true")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("delta", help="four-point hyperbolicity of a matrix")
    p.add_argument("matrix")
    p.add_argument("--norm", choices=NORMALIZATIONS, default="max")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("mds", help="classical MDS coordinates of a matrix")
    p.add_argument("matrix")
    p.add_argument("-k", type=int, default=2)
    p.add_argument("--kernel", type=float, default=None, metavar="LAMBDA",
                   help="apply 1-exp(-lambda d) first")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("bootstrap",
                       help="column bootstrap: trees, bins, diversity, matrix")
    p.add_argument("alignment")
    p.add_argument("-B", "--replicates", type=int, default=250)
    p.add_argument("--estimator", choices=("nj", "upgma"), default="nj")
    p.add_argument("--dist", choices=("hamming", "jc69"), default="hamming")
    p.add_argument("--format", choices=("fasta", "phylip"), default="fasta")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-j", "--jobs", type=int, default=_default_jobs())
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("simulate", help="simulate characters along a tree")
    p.add_argument("--shape", choices=("balanced", "comb", "random"),
                   default="balanced")
    p.add_argument("--leaves", type=int, required=True)
    p.add_argument("--edge-len", type=float, default=1.0)
    p.add_argument("--outgroup", default=None,
                   help="attach an outgroup leaf of this name at the root")
    p.add_argument("--model", choices=("cfn", "jc69"), default="jc69")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="substitution rate per unit branch length")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rates", nargs=3, type=float, metavar=("LO", "HI", "K"),
                   default=None,
                   help="rate sweep: K rates from LO to HI, one estimated "
                        "tree per replicate per rate")
    p.add_argument("--reps", type=int, default=100,
                   help="replicates per rate in a sweep")
    p.add_argument("--dist", choices=("hamming", "jc69"), default="jc69",
                   help="distance used for sweep tree estimates")
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("anneal",
                       help="search column weights putting the estimate near "
                            "a target tree")
    p.add_argument("alignment")
    p.add_argument("target")
    p.add_argument("--estimator", choices=("nj", "upgma"), default="nj")
    p.add_argument("--dist", choices=("hamming", "jc69"), default="hamming")
    p.add_argument("--format", choices=("fasta", "phylip"), default="fasta")
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--cooling", type=float, default=0.95)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--outdir", required=True)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("hclust", help="single-linkage tree of a matrix")
    p.add_argument("matrix")
    p.add_argument("--linkage", default="single")
    p.add_argument("--cut", type=int, default=None,
                   help="also write a k-cluster assignment")
    p.add_argument("--cut-out", default="-")
    p.add_argument("-o", "--out", default="-")
    p.set_defaults(func=cmd_hclust)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TreespaceError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
