"""
Command dispatcher: parses argv, validates parameters, runs one experiment
and writes its report.
"""
import argparse
import logging
import math
import sys

import numpy as np

from cli.config import ExperimentConfig, load_config, parse_float_list, parse_int_list
from cli.progress import ProgressBar
from core import bounds
from core import exp_sums
from core.errors import AcceptanceFailure, RestrictionLabError, UsageError
from core.file_manager import FileManager
from core.kernel_decomposition import (
    VARIANTS, ArcQuadrature, build_mollifier, build_sec7_family, decomposition_check,
    dyadic_supnorm_sweep, exactness_threshold, fourier_remainder_sweep, kernel_direct, kernel_integral,
    kernel_minor, kernel_piece, kernel_piece_spectral, levelset_chain_check, mollifier_transform_direct,
    supnorm_sweep,
)
from core.report import ExperimentReport
from core.restriction_experiments import (
    COEFFICIENT_KINDS, layer_cake_lp, level_set_mc, lower_bound_suite, lp_norm_grid, lp_norms_mc,
    make_coefficients, normalized, theorem1_experiment,
)
from core.rng import derive_generator
from core.sphere_lattice import enumerate_shell, shell_count, three_square_obstructed
from core.weyl_oscillatory import BumpFunction, poisson_check, weyl_envelope_check, weyl_levelset_profile

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ACCEPTANCE = 2

ACTIONS = {
    "shell": (),
    "sums": ("gauss", "quad", "kloosterman", "salie", "sigma", "selberg", "bounds", "multiplicativity"),
    "weyl": ("poisson-check", "envelope", "levelsets"),
    "kernel": ("direct", "integral", "piece", "fourier", "supnorm", "levelchain", "minor", "decompose"),
    "restrict": ("norms", "levelsets", "theorem1", "lowerbounds", "layercake"),
    "selftest": (),
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser that raises UsageError instead of exiting with status 2."""
    def error(self, message):
        raise UsageError(message)


def _parameter_parser():
    params = ArgumentParser(add_help=False, allow_abbrev=False)
    common = params.add_argument_group("common")
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--output", help="report path")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")

    values = params.add_argument_group("parameters")
    for name in ("n", "Q", "s", "s1", "s2", "q", "a", "b", "m", "N", "M", "X", "samples", "draws",
                 "cases", "levels", "budget"):
        values.add_argument(f"--{name}", type=int)
    values.add_argument("--lambda", dest="lam", type=int)
    values.add_argument("--q-max", dest="q_max", type=int)
    values.add_argument("--major-cut", dest="major_cut", type=int)
    for name in ("p", "alpha", "x"):
        values.add_argument(f"--{name}", type=float)
    values.add_argument("--q-norm", dest="q_norm", type=float)
    values.add_argument("--lambdas", type=parse_int_list)
    values.add_argument("--q-values", dest="q_values", type=parse_int_list)
    values.add_argument("--m-vec", dest="m_vec", type=parse_int_list)
    values.add_argument("--alphas", type=parse_float_list)
    values.add_argument("--ps", type=parse_float_list)
    values.add_argument("--point", type=parse_float_list)
    values.add_argument("--kind")
    values.add_argument("--variant", choices=VARIANTS)
    values.add_argument("--piece")
    values.add_argument("--method", choices=(exp_sums.DIRECT, exp_sums.CLOSED_FORM))
    values.add_argument("--select", choices=("typical", "exact"))
    values.add_argument("--export", choices=("csv", "bin"))
    values.add_argument("--count", action="store_true")
    values.add_argument("--check-explicit", dest="check_explicit", action="store_true")
    return params


def build_parser():
    """
    Builds the full command grammar.

    Returns:
        ArgumentParser: Parser with one subcommand per experiment family
    """
    params = _parameter_parser()
    parser = ArgumentParser(prog="restlab", description="Discrete restriction experiments", allow_abbrev=False)
    commands = parser.add_subparsers(dest="command", required=True)
    for command, actions in ACTIONS.items():
        if not actions:
            commands.add_parser(command, parents=[params], allow_abbrev=False)
            continue
        sub = commands.add_parser(command, allow_abbrev=False)
        sub_actions = sub.add_subparsers(dest="action", required=True)
        for action in actions:
            sub_actions.add_parser(action, parents=[params], allow_abbrev=False)
    return parser


FLAG_ONLY = ("config", "verbose", "quiet", "count", "check_explicit")


def make_config(args):
    """
    Config file values overridden by the flags that were given.

    Args:
        args (argparse.Namespace): Parsed arguments

    Returns:
        ExperimentConfig: Validated configuration
    """
    config = load_config(args.config) if args.config else ExperimentConfig()
    values = {k: v for k, v in vars(args).items() if k not in FLAG_ONLY}
    config.merge(values, "flags")
    return config.validate()


def _randomized(config):
    config.require("seed")
    return config.seed


def _default(value, fallback):
    return fallback if value is None else value


def _N(lam):
    return math.isqrt(lam) + 1


def _points(config, n, fallback_cases):
    """--point if given, else random points from --seed."""
    if config.point is not None:
        if len(config.point) != n:
            raise UsageError(f"--point needs {n} coordinates, got {len(config.point)}")
        return np.array([config.point])
    seed = _randomized(config)
    return derive_generator(seed, 4).random((_default(config.cases, fallback_cases), n))


def _shell(config):
    config.require("n", "lam")
    return enumerate_shell(config.n, config.lam, _default(config.budget, 10**8), config.resolved_threads())


def _coefficients(config, shell, fallback="random_gaussian"):
    kind = _default(config.kind, fallback)
    if kind not in COEFFICIENT_KINDS:
        raise UsageError(f"--kind must be one of {', '.join(COEFFICIENT_KINDS)}")
    seed = config.seed if kind.startswith("random") else None
    if kind.startswith("random"):
        _randomized(config)
    return make_coefficients(shell, kind, seed)


# shell

def run_shell(config, options, progress):
    config.require("n", "lam")
    n, lam = config.n, config.lam
    if options.count:
        count = shell_count(n, lam)
        print(count)
        return ExperimentReport("shell_count", {"n": n, "lambda": lam}, [], {"count": count})
    shell = _shell(config)
    print(len(shell))
    envelope = bounds.shell_size_envelope(n, shell.N)
    summary = {"count": len(shell), "N": shell.N, "size_envelope": envelope, "size_ratio": len(shell) / envelope}
    if n == 3:
        summary["three_square_obstructed"] = three_square_obstructed(lam)
    if config.export:
        path = config.output or f"shell_{n}_{lam}.{'csv' if config.export == 'csv' else 'shel'}"
        write = FileManager.write_shell_csv if config.export == "csv" else FileManager.write_shell_binary
        if not write(shell, path):
            raise RestrictionLabError(f"could not write {path}")
        summary["export"] = path
    rows = [{"point": p} for p in shell.points.tolist()] if len(shell) <= 10**4 else []
    return ExperimentReport("shell", {"n": n, "lambda": lam}, rows, summary)


# sums

def run_sums(config, options, progress):
    action = config.action
    if action == "gauss":
        if config.q_max:
            rows = []
            for q in range(1, config.q_max + 1, 2):
                magnitude = abs(exp_sums.gauss_sum(q))
                rows.append({"q": q, "abs_G": magnitude, "error": abs(magnitude - q ** -0.5)})
            worst = max(r["error"] for r in rows)
            return ExperimentReport("gauss_modulus", {"q_max": config.q_max}, rows,
                                    {"worst_error": worst, "passed": worst <= 1e-10})
        config.require("q")
        value = exp_sums.gauss_sum(config.q).value
        print(f"G({config.q}) = {value:.12g}  |G| = {abs(value):.12g}")
        return ExperimentReport("gauss", {"q": config.q}, [{"q": config.q, "value": value}], {})

    if action == "quad":
        config.require("a", "m", "q")
        a, m, q = config.a, config.m, config.q
        row = {"a": a, "m": m, "q": q, "direct": exp_sums.quad_sum(a, m, q).value}
        summary = {}
        if q % 2 and math.gcd(a, q) == 1:
            row["closed_form"] = exp_sums.quad_sum(a, m, q, exp_sums.CLOSED_FORM).value
            summary["difference"] = abs(row["direct"] - row["closed_form"])
            summary["passed"] = summary["difference"] <= 1e-10
        print(f"S({a},{m},{q}) = {row['direct']:.12g}")
        return ExperimentReport("quad_sum", {"a": a, "m": m, "q": q}, [row], summary)

    if action == "kloosterman":
        config.require("a", "b", "q")
        value = exp_sums.kloosterman(config.a, config.b, config.q).value
        print(f"K({config.a},{config.b},{config.q}) = {value.real:.12g}")
        return ExperimentReport("kloosterman", {"a": config.a, "b": config.b, "q": config.q},
                                [{"value": value, "weil_bound": bounds.weil_bound(config.q)}], {})

    if action == "salie":
        if config.q_max:
            rows, worst = exp_sums.salie_closed_form_sweep(config.q_max)
            return ExperimentReport("salie_closed_form", {"q_max": config.q_max},
                                    [{"q": q, "max_abs_diff": d} for q, d in rows],
                                    {"worst_abs_diff": worst, "passed": worst <= 1e-8})
        config.require("a", "b", "q")
        a, b, q = config.a, config.b, config.q
        direct = exp_sums.salie_direct(a, b, q).value
        row = {"direct": direct}
        summary = {}
        line = f"K2({a},{b},{q}) direct = {direct.real:.10f}"
        if options.check_explicit:
            explicit = exp_sums.salie_explicit(a, b, q).value
            difference = abs(direct - explicit)
            row["explicit"] = explicit
            summary = {"difference": difference, "passed": difference < 1e-10}
            line += f"  explicit = {explicit.real:.10f}  diff = {difference:.3g}"
        print(line)
        return ExperimentReport("salie", {"a": a, "b": b, "q": q}, [row], summary)

    if action == "sigma":
        if config.q_max:
            seed = _randomized(config)
            ns = [config.n] if config.n else [4, 5]
            return exp_sums.sigma_prime_sweep(ns, config.q_max, _default(config.draws, 20), seed)
        config.require("m_vec", "lam", "s")
        params = exp_sums.SingularParams(tuple(config.m_vec), config.lam, config.s)
        row = {"direct": exp_sums.singular_sigma(params).value}
        summary = {}
        if config.s % 2:
            row["closed_form"] = exp_sums.singular_sigma(params, exp_sums.CLOSED_FORM).value
            summary["difference"] = abs(row["direct"] - row["closed_form"])
            summary["passed"] = summary["difference"] <= 1e-9
        print(f"Sigma({config.s}) = {row['direct']:.12g}")
        return ExperimentReport("singular_series", {"m_vec": config.m_vec, "lambda": config.lam, "s": config.s},
                                [row], summary)

    if action == "selberg":
        config.require("a", "b", "X")
        partial = exp_sums.selberg_partial(config.a, config.b, config.X)
        rows = [{"q": i + 2, "partial": v, "abs": abs(v)} for i, v in enumerate(partial)]
        final = abs(partial[-1])
        print(f"|sum_(q<={config.X}) K({config.a},{config.b},q)/q| = {final:.6g}")
        return ExperimentReport("selberg", {"m": config.a, "n": config.b, "X": config.X}, rows,
                                {"final_abs": final, "final_over_sqrt_X": final / math.sqrt(config.X)})

    if action == "bounds":
        config.require("kind", "q_max")
        if config.kind not in ("kloosterman", "salie"):
            raise UsageError("--kind must be kloosterman or salie")
        rows, worst = exp_sums.bound_sweep(config.kind, config.q_max)
        keys = ("q", "a", "b", "value_re", "value_im", "bound", "ratio")
        excess = max((math.hypot(r[3], r[4]) - r[5] for r in rows), default=0.0)
        return ExperimentReport("bound_sweep", {"kind": config.kind, "q_max": config.q_max},
                                [dict(zip(keys, r)) for r in rows],
                                {"worst_ratio": worst, "max_excess": excess, "passed": excess <= 1e-6})

    config.require("m_vec", "lam", "s1", "s2")
    result = exp_sums.sigma_multiplicativity(config.m_vec, config.lam, config.s1, config.s2)
    print(f"twisted error {result['twisted_abs_error']:.3g} (scaled {result['twisted_rel_error']:.3g}), "
          f"naive {result['naive_abs_error']:.3g}")
    return ExperimentReport("multiplicativity", {"m_vec": config.m_vec, "lambda": config.lam},
                            [result], {"passed": result["twisted_rel_error"] <= 1e-9})


# weyl

def run_weyl(config, options, progress):
    action = config.action
    if action == "poisson-check":
        seed = _randomized(config)
        return poisson_check(_default(config.N, 100), _default(config.cases, 50), seed)
    if action == "envelope":
        seed = _randomized(config)
        return weyl_envelope_check(_default(config.N, 100), _default(config.samples, 1000), seed)
    config.require("N")
    levels = range(_default(config.levels, int(math.log2(config.N)) + 1))
    return weyl_levelset_profile(config.N, _default(config.x, 0.0), list(levels), config.M)


# kernel

def run_kernel(config, options, progress):
    action = config.action
    config.require("n", "lam")
    n, lam, N = config.n, config.lam, _N(config.lam)
    gamma = BumpFunction("gamma")

    if action in ("direct", "integral"):
        shell = _shell(config)
        xs = _points(config, n, 20)
        M = _default(config.M, exactness_threshold(n, lam, N))
        rows = []
        for x in xs:
            row = {"x": x.tolist(), "K": kernel_direct(shell, x)}
            if action == "integral":
                row["integral"] = kernel_integral(n, lam, N, gamma, x, M)
                row["rel_error"] = abs(row["integral"] - row["K"]) / max(len(shell), 1)
            rows.append(row)
        summary = {"shell_size": len(shell)}
        if action == "integral":
            summary["worst_rel_error"] = max(r["rel_error"] for r in rows)
            summary["passed"] = summary["worst_rel_error"] <= 1e-6
        print(f"K(x) at {len(rows)} point(s), |F| = {len(shell)}")
        return ExperimentReport(f"kernel_{action}", {"n": n, "lambda": lam, "N": N, "M": M}, rows, summary)

    if action == "piece":
        config.require("Q")
        variant = _default(config.variant, "sec4")
        major_cut = _default(config.major_cut, 100)
        spec = build_mollifier(variant, config.Q, N, s=config.s, major_cut=major_cut)
        quadrature = ArcQuadrature(spec, n, lam, gamma)
        quadrature.calibrate()
        rows = []
        for x in _points(config, n, 5):
            sample = kernel_piece(spec, n, lam, x, gamma, quadrature=quadrature)
            row = {"x": x.tolist(), "value": sample.value, "nodes": sample.quadrature_nodes,
                   "est_error": sample.est_error}
            if n <= 3:
                row["spectral"] = kernel_piece_spectral(sample.piece, n, lam, N, x, spec=spec, gamma=gamma)
                row["difference"] = abs(row["spectral"] - row["value"])
            rows.append(row)
        summary = {"fractions": len(spec.fractions),
                   "small_modulus_bound": bounds.small_modulus_envelope(n, config.Q)}
        return ExperimentReport("kernel_piece", {"n": n, "lambda": lam, "Q": config.Q, "s": config.s,
                                                 "variant": variant}, rows, summary)

    if action == "fourier":
        config.require("q_values")
        seed = _randomized(config)
        variant = _default(config.variant, "sec4")
        report = fourier_remainder_sweep(n, lam, config.q_values, variant, gamma)
        worst = 0.0
        for Q in config.q_values:
            spec = build_mollifier(variant, Q, N)
            ks = derive_generator(seed, 5, Q).integers(-2 * N, 2 * N + 1, size=(_default(config.cases, 100), n))
            ls = (ks * ks).sum(axis=1) - lam
            direct = mollifier_transform_direct(spec, ls)
            for l, d in zip(ls.tolist(), direct):
                closed = spec.transform(l)
                worst = max(worst, abs(d - closed) / max(abs(closed), 1.0 / Q))
        report.summary["closed_form_rel_error"] = worst
        report.summary["passed"] = report.passed and worst <= 1e-6
        return report

    if action == "supnorm":
        seed = _randomized(config)
        variant = _default(config.variant, "sec4")
        if variant == "sec7":
            return dyadic_supnorm_sweep(n, lam, _default(config.major_cut, 100), _default(config.samples, 1000),
                                        seed, gamma=gamma)
        config.require("q_values")
        return supnorm_sweep(n, lam, config.q_values, _default(config.samples, 1000), seed, variant, gamma)

    if action == "levelchain":
        seed = _randomized(config)
        shell = _shell(config)
        alpha = _default(config.alpha, N ** 0.8)
        Q = _default(config.Q, N)
        rows = []
        for draw in range(_default(config.draws, 5)):
            coefficients = make_coefficients(shell, _default(config.kind, "random_gaussian"), seed, draw)
            result = levelset_chain_check(shell, coefficients, alpha, Q, _default(config.samples, 10**5),
                                          seed + draw, gamma=gamma)
            rows.append({"draw": draw, "passed": result.passed, "checks": result.rows,
                         "measure": result.summary["measure"][0], "kff": result.summary["kff"][0]})
            progress.set_progress(int((draw + 1) * 100 / _default(config.draws, 5)), f"draw {draw + 1}")
        return ExperimentReport("levelchain", {"n": n, "lambda": lam, "alpha": alpha, "Q": Q, "seed": seed},
                                rows, {"passed": all(r["passed"] for r in rows)})

    if action == "minor":
        family = build_sec7_family(N, major_cut=_default(config.major_cut, 100))
        samples = kernel_minor(family, n, lam, _points(config, n, 5), gamma)
        rows = [{"x": list(s.x), "value": s.value, "nodes": s.quadrature_nodes, "est_error": s.est_error}
                for s in samples]
        summary = {"pieces": len(family), "rho_mass": family.rho_transform(0).real,
                   "envelope": bounds.kminor_sup_envelope(n, N)}
        return ExperimentReport("kernel_minor", {"n": n, "lambda": lam, "N": N}, rows, summary)

    seed = _randomized(config)
    major_cut = _default(config.major_cut, 100)
    report = decomposition_check(n, lam, _points(config, n, 20), major_cut, gamma)
    family = build_sec7_family(N, major_cut=major_cut)
    ts = derive_generator(seed, 6).random(1000)
    partition = float(np.max(np.abs(family.rho(ts) + family.eta_sum(ts) - 1.0)))
    report.summary["partition_error"] = partition
    report.summary["passed"] = report.passed and partition <= 1e-10
    return report


# restrict

def run_restrict(config, options, progress):
    action = config.action
    workers = config.resolved_threads()
    samples = _default(config.samples, 10**5)

    if action == "theorem1":
        config.require("n", "p", "lambdas")
        seed = _randomized(config)
        kind = _default(config.kind, "random_signs")
        if kind not in ("random_signs", "random_gaussian"):
            raise UsageError("--kind must be random_signs or random_gaussian")
        return theorem1_experiment(config.n, config.p, config.lambdas, samples, seed,
                                   _default(config.draws, 32), workers, kind,
                                   _default(config.select, "typical"),
                                   progress_callback=progress.set_progress)

    if action == "lowerbounds":
        config.require("n")
        seed = _randomized(config)
        grid = config.lambdas or ([config.lam] if config.lam else None)
        if grid is None:
            raise UsageError("--lambda or --lambdas is required for 'restrict lowerbounds'")
        return lower_bound_suite(config.n, grid, _default(config.p, 6), _default(config.q_norm, 2),
                                 _default(config.samples, 10**4), seed, _default(config.draws, 32), workers)

    shell = _shell(config)
    coefficients = _coefficients(config, shell)
    seed = _randomized(config)
    params = {"n": shell.n, "lambda": shell.lam, "kind": coefficients.kind, "samples": samples, "seed": seed}

    if action == "norms":
        ps = config.ps or [2.0, 4.0, 6.0]
        estimates = lp_norms_mc(coefficients, ps, samples, seed, workers)
        rows = []
        for p, (value, error) in zip(ps, estimates):
            row = {"p": p, "estimate": value, "std_error": error}
            if shell.n <= 2 and float(p).is_integer() and int(p) % 2 == 0:
                row["exact"] = lp_norm_grid(coefficients, int(p))
            rows.append(row)
        print("\n".join(f"||F||_{r['p']:g} = {r['estimate']:.6g} +- {r['std_error']:.2g}" for r in rows))
        return ExperimentReport("lp_norms", params, rows, {"l2_norm": coefficients.norm_q(2)})

    if action == "levelsets":
        config.require("alphas")
        estimates = level_set_mc(coefficients, config.alphas, samples, seed, workers)
        l2 = coefficients.norm_q(2) ** 2
        rows = []
        for est in estimates:
            envelope = bounds.bnew13_envelope(shell.n, shell.N, est.alpha) if est.alpha > 0 else None
            rows.append({**est._asdict(), "bnew13_ratio": est.measure / envelope if envelope else None,
                         "chebyshev_ok": est.alpha ** 2 * est.measure <= l2 + 3 * est.alpha ** 2 * est.std_error})
        return ExperimentReport("level_sets", params, rows,
                                {"passed": all(r["chebyshev_ok"] for r in rows)})

    config.require("p")
    result = layer_cake_lp(normalized(coefficients), config.p, samples, seed, workers=workers)
    result["passed"] = result["relative_difference"] <= 1e-2
    return ExperimentReport("layer_cake", {**params, "p": config.p}, [], result)


def run_selftest_command(config, options, progress):
    from cli.selftest import run_selftest

    return run_selftest(_default(config.seed, 0), config.resolved_threads(), progress)


HANDLERS = {
    "shell": run_shell,
    "sums": run_sums,
    "weyl": run_weyl,
    "kernel": run_kernel,
    "restrict": run_restrict,
    "selftest": run_selftest_command,
}


def _print_summary(report, path):
    print(f"[{report.name}]")
    for key, value in sorted(report.to_dict()["summary"].items()):
        if not isinstance(value, (dict, list)):
            print(f"  {key}: {value}")
    if path:
        print(f"  report: {path}")
    if "passed" in report.summary:
        print("  verdict: " + ("PASS" if report.passed else "FAIL"))


def run_command(argv):
    """
    Runs one command line.

    Args:
        argv (list): Arguments without the program name

    Returns:
        int: 0 on success, 1 on usage or validation errors, 2 when an
            acceptance check fails
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        logger.error("usage: %s", e)
        return EXIT_USAGE
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    root = logging.getLogger()
    if args.verbose:
        root.setLevel(logging.DEBUG)
    elif args.quiet:
        root.setLevel(logging.WARNING)

    progress = ProgressBar(enabled=not args.quiet and sys.stderr.isatty())
    try:
        config = make_config(args)
        progress.start_operation(" ".join(filter(None, (config.command, config.action))))
        report = HANDLERS[args.command](config, args, progress)
        path = None
        if report is not None and not (config.command == "shell" and config.export):
            suffix = "-".join(filter(None, (config.command, config.action)))
            path = config.output or f"restlab-{suffix}.{config.format}"
            if not FileManager.write_report(report, path, config.format):
                raise RestrictionLabError(f"could not write {path}")
        progress.finish_operation()
        if report is not None:
            _print_summary(report, path)
            if not report.passed:
                raise AcceptanceFailure(f"{report.name}: acceptance check failed")
        return EXIT_OK
    except AcceptanceFailure as e:
        logger.error("%s", e)
        return EXIT_ACCEPTANCE
    except (RestrictionLabError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except Exception:
        logger.exception("Unexpected error")
        return EXIT_USAGE
    finally:
        progress.finish_operation()
