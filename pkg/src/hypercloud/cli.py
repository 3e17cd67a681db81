"""Command-line interface.

Subcommands cover synthetic data, noise injection, spectrum estimation,
coefficient fitting, denoising, sampling, the GSP baselines, and the two
experiment pipelines.  A JSON config file can supply any flag's value;
explicit command-line flags win.  Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .baselines import (build_gaussian_graph, dump_graph_csv, gft_downsample,
                        gsp_tv_denoise, laplacian_reg_denoise, mls_denoise)
from .coeffopt import estimate_coefficients
from .denoise import DenoiseConfig, joint_denoise, write_trace_csv
from .harness import (DEFAULT_RATIOS, TABLE1_METHODS, ExperimentConfig,
                      clean_fit_pairs, run_msecurve, run_table1)
from .pointcloud import NoiseSpec, add_noise, generate_shape, load, save
from .sampling import hgft_downsample, hpf_scores, sample_top_k
from .spectral import (SpectralPairs, estimate_spectrum, load_pairs, save_pairs,
                       supporting_matrix)


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _auto_float(text: str):
    if text == "auto":
        return None
    return float(text)


def _float_list(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _cuts_mode(text: str):
    if text not in ("auto", "on", "off"):
        raise argparse.ArgumentTypeError("expected auto, on, or off")
    return {"auto": None, "on": True, "off": False}[text]


def build_parser():
    parser = _Parser(prog="hypercloud",
                     description="Hypergraph spectral processing of 3D point clouds")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    registry = {}

    def cmd(name, **kw):
        p = sub.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter, **kw)
        p.add_argument("--config", default=None, metavar="JSON",
                       help="JSON file supplying flag defaults (flags override)")
        registry[name] = p
        return p

    p = cmd("synth", help="generate a synthetic shape surface sample")
    p.add_argument("--shape", required=True,
                   choices=["cube", "cylinder", "planes", "sphere"])
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output cloud path")
    p.add_argument("--format", default="auto", choices=["auto", "xyz", "ply-ascii"])
    p.add_argument("--side", type=float, default=None,
                   help="cube side (default 2.0) or planes square side (default 1.0)")
    p.add_argument("--radius", type=float, default=None,
                   help="cylinder/sphere radius (default 1.0)")
    p.add_argument("--height", type=float, default=None,
                   help="cylinder height (default 2.0)")
    p.add_argument("--dihedral-deg", type=float, default=None,
                   help="planes dihedral angle in degrees (default 90)")

    p = cmd("noise", help="add seeded noise to a cloud")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, choices=["uniform", "gaussian", "impulse"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lo", type=float, default=-0.01, help="uniform lower bound")
    p.add_argument("--hi", type=float, default=0.01, help="uniform upper bound")
    p.add_argument("--mean", type=float, default=0.0, help="gaussian mean")
    p.add_argument("--variance", type=float, default=1e-4, help="gaussian variance")
    p.add_argument("--p", type=float, default=0.05, help="impulse hit probability")
    p.add_argument("--spread", type=float, default=0.5,
                   help="impulse offset bound per coordinate")

    p = cmd("spectrum", help="estimate the spectrum basis of a cloud")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pairs-out", required=True, help="output pairs JSON")
    p.add_argument("--completion", default="auto",
                   choices=["auto", "graph", "cosine", "canonical"],
                   help="null-space completion seed family")

    p = cmd("fit", help="estimate spectrum and frequency coefficients")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pairs-out", default=None, help="output pairs JSON")
    p.add_argument("--solution-out", default=None, help="output solve report JSON")
    p.add_argument("--alpha", type=float, default=1e-3, help="smoothness weight")
    p.add_argument("--beta", type=float, default=1.0, help="coefficient ridge weight")
    p.add_argument("--completion", default="auto",
                   choices=["auto", "graph", "cosine", "canonical"])
    p.add_argument("--candidates", type=_int_list, default=None,
                   help="comma-separated forced-maximum candidates "
                        "(default: all components for N<=64, else top 16 by energy)")
    p.add_argument("--cuts", type=_cuts_mode, default=None, metavar="{auto,on,off}",
                   help="adjacency-nonnegativity cut enforcement "
                        "(auto: on while C(N+2,3) <= 1000, i.e. N <= 17)")
    p.add_argument("--cut-budget", type=int, default=256, help="cuts added per round")
    p.add_argument("--cut-rounds", type=int, default=50, help="separation round cap")

    p = cmd("denoise", help="joint spectrum estimation and denoising")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="denoised cloud path")
    p.add_argument("--alpha", type=_auto_float, default=None, metavar="FLOAT|auto",
                   help="smoothness weight (default: noise-adaptive)")
    p.add_argument("--beta", type=_auto_float, default=None, metavar="FLOAT|auto",
                   help="coefficient ridge weight (default: noise-adaptive)")
    p.add_argument("--iters", type=int, default=3, help="outer iterations")
    p.add_argument("--trace-out", default=None, help="objective trace CSV")
    p.add_argument("--pairs-out", default=None, help="final pairs JSON")

    p = cmd("sample-hpf", help="feature-preserving sampling by high-pass scores")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, required=True, help="points to keep")
    p.add_argument("--out", required=True, help="sampled cloud path")
    p.add_argument("--indices-out", default=None, help="index list CSV")
    p.add_argument("--pairs-in", default=None, help="reuse fitted pairs JSON")
    p.add_argument("--alpha", type=float, default=1e-3, help="fit smoothness weight")
    p.add_argument("--beta", type=float, default=1.0, help="fit ridge weight")

    p = cmd("sample-hgft", help="bandlimited downsampling via the transform")
    p.add_argument("--in", dest="input", required=True)
    keep = p.add_mutually_exclusive_group(required=True)
    keep.add_argument("--keep", type=int, help="components to keep")
    keep.add_argument("--ratio", type=float, help="keep ratio in (0, 1]")
    p.add_argument("--out", required=True, help="recovered cloud path")
    p.add_argument("--coeffs-out", default=None, help="kept coefficients CSV")
    p.add_argument("--curve-out", default=None, help="MSE-vs-keep curve CSV")
    p.add_argument("--ratios", type=_float_list, default=DEFAULT_RATIOS,
                   help="comma-separated ratios for --curve-out")
    p.add_argument("--pairs-in", default=None, help="reuse fitted pairs JSON")
    p.add_argument("--alpha", type=float, default=1e-3, help="fit smoothness weight")
    p.add_argument("--beta", type=float, default=1.0, help="fit ridge weight")

    for name, extra in (
        ("baseline-tv", ("alpha",)),
        ("baseline-lr", ("alpha",)),
        ("baseline-mls", ("iterations", "step")),
        ("baseline-gft", ("keep",)),
    ):
        p = cmd(name, help=f"GSP baseline: {name.split('-', 1)[1]}")
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--delta", type=float, default=None,
                       help="Gaussian kernel width (default: data-adaptive)")
        p.add_argument("--t", type=float, default=None,
                       help="squared-distance threshold (default: data-adaptive)")
        p.add_argument("--graph-out", default=None, help="edge-list CSV dump")
        if "alpha" in extra:
            p.add_argument("--alpha", type=float, default=1.0)
        if "iterations" in extra:
            p.add_argument("--iterations", type=int, default=10)
            p.add_argument("--step", type=float, default=0.5)
        if "keep" in extra:
            grp = p.add_mutually_exclusive_group(required=True)
            grp.add_argument("--keep", type=int)
            grp.add_argument("--ratio", type=float)

    p = cmd("table1", help="noise-robustness comparison table")
    p.add_argument("--in", dest="input", required=True, help="clean cloud path")
    p.add_argument("--out-prefix", required=True,
                   help="writes PREFIX.csv, PREFIX.json, PREFIX.timing.csv")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default=",".join(TABLE1_METHODS),
                   help="comma-separated subset of " + ",".join(TABLE1_METHODS))
    p.add_argument("--hgsp-alpha", type=_auto_float, default=None,
                   metavar="FLOAT|auto")
    p.add_argument("--hgsp-beta", type=_auto_float, default=None,
                   metavar="FLOAT|auto")
    p.add_argument("--hgsp-iters", type=int, default=3)
    p.add_argument("--tv-alpha", type=float, default=1.0)
    p.add_argument("--lr-alpha", type=float, default=1.0)
    p.add_argument("--mls-iterations", type=int, default=10)
    p.add_argument("--mls-step", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--impulse-spread", type=float, default=None,
                   help="impulse offset bound (default 0.5)")

    p = cmd("msecurve", help="reconstruction MSE vs keep ratio, HGSP vs GSP")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-prefix", required=True,
                   help="writes PREFIX.csv, PREFIX.json, PREFIX.timing.csv")
    p.add_argument("--ratios", type=_float_list, default=DEFAULT_RATIOS)
    p.add_argument("--fit-alpha", type=float, default=1e-3)
    p.add_argument("--fit-beta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--t", type=float, default=None)

    return parser, registry


def _apply_config_file(parser, registry, argv):
    """Use a --config JSON file as flag defaults for the chosen subcommand."""
    if "--config" not in argv:
        return argv
    pos = argv.index("--config")
    if pos + 1 >= len(argv):
        raise CliUsageError("--config requires a path")
    with open(argv[pos + 1], "r", encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise CliUsageError("config file must hold a JSON object")
    command = next((a for a in argv if not a.startswith("-")), None)
    if command not in registry:
        raise CliUsageError("config file requires a subcommand")
    sub = registry[command]
    known = {a.dest for a in sub._actions}
    bad = set(values) - known
    if bad:
        raise CliUsageError(f"config keys not recognized by {command}: {sorted(bad)}")
    sub.set_defaults(**values)
    return argv


def _resolve_keep(n, keep, ratio):
    if keep is None:
        if not 0.0 < ratio <= 1.0:
            raise CliUsageError(f"--ratio must be in (0, 1], got {ratio}")
        keep = max(1, int(round(ratio * n)))
    if not 1 <= keep <= n:
        raise CliUsageError(f"--keep must be in [1, {n}], got {keep}")
    return keep


def _fit_pairs(cloud, alpha, beta, completion="auto", candidates=None,
               cuts=None, cut_budget=256, cut_rounds=50):
    basis = estimate_spectrum(cloud, completion=completion)
    solution = estimate_coefficients(cloud, basis, alpha=alpha, beta=beta,
                                     candidates=candidates,
                                     enforce_cuts=cuts, cut_budget=cut_budget,
                                     cut_rounds=cut_rounds)
    return SpectralPairs(basis=basis, sigma=solution.sigma, lambda_max=1.0), solution


def _pairs_for_sampling(args, cloud):
    if args.pairs_in:
        pairs, _ = load_pairs(args.pairs_in)
        if pairs.n != cloud.n:
            raise ValueError(f"pairs JSON is for N={pairs.n}, cloud has N={cloud.n}")
        return pairs
    pairs, _ = _fit_pairs(cloud, args.alpha, args.beta)
    return pairs


def _write_indices_csv(path, indices, scores):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rank,index,score\n")
        for rank, idx in enumerate(indices):
            fh.write(f"{rank},{int(idx)},{scores[idx]!r}\n")


def _run(args) -> int:
    command = args.command
    if command == "synth":
        params = {}
        if args.side is not None:
            params["side"] = args.side
        if args.radius is not None:
            params["radius"] = args.radius
        if args.height is not None:
            params["height"] = args.height
        if args.dihedral_deg is not None:
            params["dihedral_deg"] = args.dihedral_deg
        cloud = generate_shape(args.shape, args.n, args.seed, **params)
        save(cloud, args.out, fmt=args.format)
        print(f"wrote {cloud.n} points to {args.out}")
        return 0
    if command == "noise":
        cloud = load(args.input)
        spec = NoiseSpec(kind=args.kind, seed=args.seed, lo=args.lo, hi=args.hi,
                         mean=args.mean, variance=args.variance, p=args.p,
                         spread=args.spread)
        save(add_noise(cloud, spec), args.out)
        print(f"wrote noisy cloud to {args.out}")
        return 0
    if command == "spectrum":
        cloud = load(args.input)
        basis = estimate_spectrum(cloud, completion=args.completion)
        pairs = SpectralPairs(basis=basis, sigma=np.ones(cloud.n), lambda_max=1.0)
        save_pairs(pairs, args.pairs_out)
        print(f"wrote spectrum (source rank {basis.source_rank}) to {args.pairs_out}")
        return 0
    if command == "fit":
        cloud = load(args.input)
        pairs, solution = _fit_pairs(cloud, args.alpha, args.beta,
                                     completion=args.completion,
                                     candidates=args.candidates, cuts=args.cuts,
                                     cut_budget=args.cut_budget,
                                     cut_rounds=args.cut_rounds)
        if args.pairs_out:
            save_pairs(pairs, args.pairs_out)
        if args.solution_out:
            with open(args.solution_out, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(solution.to_dict(), fh, sort_keys=True, indent=1)
                fh.write("\n")
        print(f"objective {solution.objective:.6g} at forced index "
              f"{solution.forced_index} ({solution.cut_rounds} cut rounds)")
        return 0
    if command == "denoise":
        cloud = load(args.input)
        cfg = DenoiseConfig(alpha=args.alpha, beta=args.beta,
                            outer_iters=args.iters)
        result = joint_denoise(cloud, cfg)
        save(result.denoised, args.out)
        if args.trace_out:
            write_trace_csv(result, args.trace_out)
        if args.pairs_out:
            save_pairs(result.pairs, args.pairs_out)
        print(f"wrote denoised cloud to {args.out}")
        return 0
    if command == "sample-hpf":
        cloud = load(args.input)
        pairs = _pairs_for_sampling(args, cloud)
        scores = hpf_scores(cloud, supporting_matrix(pairs))
        subset, indices = sample_top_k(scores, cloud, args.k)
        save(subset, args.out)
        if args.indices_out:
            _write_indices_csv(args.indices_out, indices, scores.scores)
        print(f"wrote {subset.n} sampled points to {args.out}")
        return 0
    if command == "sample-hgft":
        cloud = load(args.input)
        pairs = _pairs_for_sampling(args, cloud)
        keep = _resolve_keep(cloud.n, args.keep, args.ratio)
        kept, recovered = hgft_downsample(cloud, pairs, keep)
        save(recovered, args.out)
        if args.coeffs_out:
            with open(args.coeffs_out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("position,c_x,c_y,c_z\n")
                for j in range(keep):
                    fh.write(f"{j},{kept[j, 0]!r},{kept[j, 1]!r},{kept[j, 2]!r}\n")
        if args.curve_out:
            from .pointcloud import error_metrics
            with open(args.curve_out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("keep,ratio,mse\n")
                for ratio in args.ratios:
                    c = _resolve_keep(cloud.n, None, ratio)
                    _, rec = hgft_downsample(cloud, pairs, c)
                    fh.write(f"{c},{ratio!r},{error_metrics(rec, cloud).mse!r}\n")
        print(f"wrote recovery from {keep} components to {args.out}")
        return 0
    if command.startswith("baseline-"):
        cloud = load(args.input)
        graph = build_gaussian_graph(cloud, args.delta, args.t)
        if args.graph_out:
            dump_graph_csv(graph, args.graph_out)
        kind = command.split("-", 1)[1]
        if kind == "tv":
            out = gsp_tv_denoise(cloud, graph, args.alpha)
        elif kind == "lr":
            out = laplacian_reg_denoise(cloud, graph, args.alpha)
        elif kind == "mls":
            out = mls_denoise(cloud, graph, args.iterations, args.step)
        else:
            keep = _resolve_keep(cloud.n, args.keep, args.ratio)
            out = gft_downsample(cloud, graph, keep)
        save(out, args.out)
        print(f"wrote {kind} baseline output to {args.out}")
        return 0
    if command == "table1":
        cloud = load(args.input)
        config = ExperimentConfig(
            seed=args.seed, trials=args.trials,
            methods=tuple(m for m in args.methods.split(",") if m),
            hgsp_alpha=args.hgsp_alpha, hgsp_beta=args.hgsp_beta,
            hgsp_iters=args.hgsp_iters, tv_alpha=args.tv_alpha,
            lr_alpha=args.lr_alpha, mls_iterations=args.mls_iterations,
            mls_step=args.mls_step, graph_delta=args.delta,
            graph_threshold=args.t, impulse_spread=args.impulse_spread)
        report = run_table1(cloud, config)
        report.write_csv(args.out_prefix + ".csv")
        report.write_json(args.out_prefix + ".json")
        report.write_timing_csv(args.out_prefix + ".timing.csv")
        print(f"wrote table to {args.out_prefix}.csv")
        return 0
    if command == "msecurve":
        cloud = load(args.input)
        config = ExperimentConfig(seed=0, trials=1, ratios=args.ratios,
                                  fit_alpha=args.fit_alpha, fit_beta=args.fit_beta,
                                  graph_delta=args.delta, graph_threshold=args.t)
        report = run_msecurve(cloud, config)
        report.write_csv(args.out_prefix + ".csv")
        report.write_json(args.out_prefix + ".json")
        report.write_timing_csv(args.out_prefix + ".timing.csv")
        print(f"wrote curve to {args.out_prefix}.csv")
        return 0
    raise CliUsageError(f"missing or unknown subcommand {command!r}")


def cli_main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()
    try:
        argv = _apply_config_file(parser, registry, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else 1
    try:
        return _run(args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
