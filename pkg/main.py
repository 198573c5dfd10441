"""
Main entry point for RibSim
Command-line verbs for the ribbon benchmarks, run comparison,
efficiency reports and the invariant suite
"""

import argparse
import asyncio
import json
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.config import config
from src.logger import get_logger, logger_factory
from src.config_parser import DIRECTIONS, DocumentParser, parse_config, preset_config
from src.errors import VALIDATION_EXIT_CODE, ConfigurationError, RibbonError
from src.energy_models import MODEL_IDS
from src.references import references
from src.reports import bench_perf, compare_runs, format_table
from src.runner import result_stem, run_batch, run_config, save_result
from src.trace_io import read_trace
from src.validation import run_invariant_suite

logger = get_logger(__name__)

SWEEP_VERBS = ('shear', 'twist', 'shear_twist')
BENCH_MODELS = ('kirchhoff', 'sano')
BENCH_MESHES = (45, 63)


def _add_benchmark_options(parser, repeat_width=False):
    parser.add_argument('--config', type=Path, help='Benchmark document (KEY=VALUE with units)')
    parser.add_argument('--model', choices=MODEL_IDS, help='Energy model')
    if repeat_width:
        parser.add_argument('--width-ratio', action='append', type=_ratio,
                            help='W/L; repeat to run several widths in parallel')
    else:
        parser.add_argument('--width-ratio', type=_ratio, help='W/L, e.g. 1/12')
    parser.add_argument('--mesh', type=int, help='Number of nodes M')
    parser.add_argument('--seed', type=int, help='Seed of the buckling perturbation')
    parser.add_argument('--direction', choices=('pos', 'neg'), help='Sweep direction')
    parser.add_argument('--out', type=Path, default=None, help='Output directory')


def _ratio(text):
    try:
        return DocumentParser.parse_number('width-ratio', text)
    except ConfigurationError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser():
    parser = argparse.ArgumentParser(prog='ribsim', description='Discrete elastic ribbon benchmarks')
    parser.add_argument('--reference', type=Path, help='Reference data file (default: shipped table)')
    parser.add_argument('--log-level', help='Override RIBSIM_LOG_LEVEL; DEBUG shows every time step')
    verbs = parser.add_subparsers(dest='verb', required=True)

    run = verbs.add_parser('run', help='Run one benchmark document or preset')
    run.add_argument('--preset', default='shear', help='Preset used when no --config is given')
    _add_benchmark_options(run)

    sweep = verbs.add_parser('sweep', help='Compression then a shear, twist or combined sweep')
    sweep.add_argument('kind', choices=SWEEP_VERBS)
    _add_benchmark_options(sweep, repeat_width=True)

    homotopy = verbs.add_parser('homotopy', help='Width homotopy from a buckled narrow ribbon')
    homotopy.add_argument('--target', type=_ratio, help='Final W/L')
    _add_benchmark_options(homotopy)

    compare = verbs.add_parser('compare', help='Transition shift of trace B against baseline A')
    compare.add_argument('baseline', type=Path)
    compare.add_argument('candidate', type=Path)
    compare.add_argument('--model', choices=MODEL_IDS, help='Model of the candidate run')
    compare.add_argument('--width-ratio', type=_ratio, help='W/L of the candidate run')
    compare.add_argument('--out', type=Path, default=None, help='Write the report as JSON here')

    bench = verbs.add_parser('bench', help='Solver efficiency report')
    bench.add_argument('--model', action='append', choices=MODEL_IDS)
    bench.add_argument('--mesh', action='append', type=int)
    bench.add_argument('--width-ratio', type=_ratio)
    bench.add_argument('--seed', type=int)
    bench.add_argument('--out', type=Path, default=None)

    validate = verbs.add_parser('validate', help='Run the invariant suite')
    validate.add_argument('--seed', type=int, default=0)
    validate.add_argument('--samples', type=int, default=200)
    return parser


def _overrides(args, **extra):
    overrides = {
        'model': getattr(args, 'model', None),
        'n_nodes': getattr(args, 'mesh', None),
        'seed': getattr(args, 'seed', None),
    }
    if getattr(args, 'direction', None):
        overrides['direction'] = DIRECTIONS[args.direction]
    overrides.update(extra)
    return {k: v for k, v in overrides.items() if v is not None}


def _benchmark_config(args, preset, **extra):
    overrides = _overrides(args, **extra)
    if args.config:
        return parse_config(args.config, overrides)
    return preset_config(preset, **overrides)


def _exit_code(result):
    return ConfigurationError.exit_code if result['error'] == ConfigurationError.category else 3


def _report(result, out_dir):
    """Print and save one run result; returns the exit code"""
    if not result['success']:
        print(f"  FAILED [{result['error']}]: {result['error_message']}")
        return _exit_code(result)

    data = result['data']
    paths = save_result(data, out_dir)
    for warning in data.config.warnings:
        print(f"  warning: {warning}")
    print(f"  {result_stem(data.config)}: {data.steps} steps, {data.iterations} Newton iterations")
    print(f"  prebuckled H_m/L = {data.prebuckled_height:.5f}")
    transitions = data.transitions.to_dict()
    for name, value in transitions.items():
        print(f"  {name}: {'absent' if value is None else f'{value:.4f}'}")
    if data.snap is not None:
        snap = data.snap
        print(f"  snap-through at {snap.control:.4f} ({snap.pre_height:+.4f} -> {snap.post_height:+.4f})")
    print(f"  trace: {paths['trace']}")
    return 0


def cmd_run(args):
    benchmark = _benchmark_config(args, args.preset, width_ratio=args.width_ratio)
    return _report(run_config(benchmark), args.out)


def cmd_sweep(args):
    widths = args.width_ratio or [None]
    configs = [_benchmark_config(args, args.kind, sweep=args.kind, width_ratio=w) for w in widths]
    if len(configs) == 1:
        results = [run_config(configs[0])]
    else:
        results = asyncio.run(run_batch(configs))
    codes = [_report(r, args.out) for r in results]
    return max(codes)


def cmd_homotopy(args):
    benchmark = _benchmark_config(args, 'homotopy', sweep='homotopy', width_ratio=args.width_ratio,
                                  homotopy_target=args.target)
    return _report(run_config(benchmark), args.out)


def cmd_compare(args):
    baseline = read_trace(args.baseline)
    candidate = read_trace(args.candidate)
    report = compare_runs(baseline, candidate, model=args.model, width_ratio=args.width_ratio)
    for name, entry in report['transitions'].items():
        shift = entry['shift_percent']
        print(f"  {name}: baseline={entry['baseline']}, candidate={entry['candidate']}, "
              f"shift={'-' if shift is None else f'{shift:.2f}%'}, "
              f"published={entry['published_shift']}, abs_error={entry['abs_error']}")
        for note in entry['notes']:
            print(f"    note: {note}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(report, indent=2, sort_keys=True))
        print(f"  report: {args.out}")
    return 0


def cmd_bench(args):
    models = args.model or list(BENCH_MODELS)
    meshes = args.mesh or list(BENCH_MESHES)
    configs = [preset_config('bench', model=m, n_nodes=n, width_ratio=args.width_ratio, seed=args.seed)
               for m in models for n in meshes]
    report = bench_perf(configs)
    print(format_table(report['rows']))
    for entry in report['mesh_ratios']:
        print(f"  {entry['model']} W/L={entry['width']} M={entry['n_nodes']}: "
              f"per-iteration time ratio {entry['per_iteration_ratio']:.3f}")
    for entry in report['model_overhead']:
        print(f"  {entry['model']} vs kirchhoff (M={entry['n_nodes']}): "
              f"per-iteration overhead {entry['overhead_percent']:+.1f}%")

    out_dir = Path(args.out or config.OUT_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / 'bench.json'
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=str))
    print(f"  report: {path}")
    return 0


def cmd_validate(args):
    records = run_invariant_suite(seed=args.seed, samples=args.samples)
    print(format_table(records, columns=('name', 'passed', 'max_error', 'tolerance')))
    failed = [r for r in records if not r['passed']]
    if failed:
        print(f"\n{len(failed)} check(s) failed")
        return VALIDATION_EXIT_CODE
    print(f"\nAll {len(records)} checks passed")
    return 0


COMMANDS = {
    'run': cmd_run,
    'sweep': cmd_sweep,
    'homotopy': cmd_homotopy,
    'compare': cmd_compare,
    'bench': cmd_bench,
    'validate': cmd_validate,
}


def main(argv=None):
    """
    Parse the command line and run one verb.

    Returns:
        int: Process exit code (0 success, 2 config, 3 solver or scenario, 4 validation)
    """
    args = build_parser().parse_args(argv)
    code = 0
    try:
        print("=" * 60)
        print(f"RibSim {args.verb}".center(60))
        print("=" * 60)
        print()

        config.validate()
        if args.log_level:
            logger_factory.set_level(args.log_level)
        if args.reference:
            references.load(args.reference)

        logger.info(f"Starting {args.verb}")
        code = COMMANDS[args.verb](args)

    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        logger.info("Interrupted by user")
        code = 130
    except RibbonError as e:
        print(f"\nError [{e.category}]: {e}")
        logger.error(f"{args.verb} failed ({e.category}): {e}")
        code = e.exit_code
    except ValueError as e:
        print(f"\nConfiguration Error: {e}")
        logger.error(f"Configuration error: {e}")
        print("\nPlease check your .env file and the benchmark document.")
        code = ConfigurationError.exit_code
    except Exception as e:
        print(f"\nFatal Error: {e}")
        logger.error(f"Fatal error: {e}", exc_info=True)
        code = 3
    finally:
        logger.info(f"{args.verb} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
