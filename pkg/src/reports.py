"""
Reports Module
Transition shift comparison between runs and solver efficiency reports
"""

from .logger import get_logger
from .references import TRANSITIONS, references, width_key
from .scenarios import detect_transitions, run_benchmark

logger = get_logger(__name__)

BENCH_PHASE = 'shear'
BENCH_COLUMNS = ('model', 'width', 'n_nodes', 'realtime_ratio', 'wall_clock', 'steps',
                 'iterations', 'iterations_per_step', 'per_iteration', 'rejected_steps', 'total_wall_clock')


def _shift_percent(baseline, candidate):
    return (1.0 - candidate / baseline) * 100.0


def compare_runs(trace_a, trace_b, model=None, width_ratio=None, reference=None):
    """
    Shift of the transition points of ``trace_b`` relative to baseline ``trace_a``.

    Args:
        trace_a (Trace): Baseline run (usually W/L = 1/20)
        trace_b (Trace): Compared run
        model (str): Model of ``trace_b`` for the published values
        width_ratio (float): W/L of ``trace_b`` (default: trace metadata)
        reference (ReferenceData): Defaults to the shipped table

    Returns:
        dict: {'transitions': {name: entry}} where each entry holds
        'baseline', 'candidate', 'shift_percent', 'abs_error',
        'published_shift' and 'notes' (absent transitions are annotated)
    """
    reference = reference or references
    found_a = detect_transitions(trace_a)
    found_b = detect_transitions(trace_b)
    if width_ratio is None:
        width_ratio = trace_b.metadata.get('width_ratio')
    model = model or trace_b.metadata.get('model')

    report = {'width': width_key(width_ratio) if width_ratio else None, 'model': model, 'transitions': {}}
    for name, a, b in zip(TRANSITIONS, (found_a.first, found_a.second), (found_b.first, found_b.second)):
        entry = {'baseline': a, 'candidate': b, 'shift_percent': None, 'abs_error': None,
                 'published_shift': None, 'notes': []}
        if a is None:
            entry['notes'].append('NoTransition in baseline')
        if b is None:
            entry['notes'].append('NoTransition in candidate')
        if a is not None and b is not None:
            entry['shift_percent'] = _shift_percent(a, b)
        if width_ratio:
            fea = reference.fea_critical_shear(name, width_ratio)
            if fea is not None and b is not None:
                entry['abs_error'] = abs(b - fea)
            if model:
                entry['published_shift'] = reference.shift_percent(name, model, width_ratio)
        report['transitions'][name] = entry
        logger.info(f"{name}: baseline={a}, candidate={b}, shift={entry['shift_percent']}")
    return report


def _phase_counters(result):
    phases = result.phases
    if BENCH_PHASE in phases:
        return phases[BENCH_PHASE]
    return {
        'steps': sum(p['steps'] for p in phases.values()),
        'iterations': sum(p['iterations'] for p in phases.values()),
        'wall_time': sum(p['wall_time'] for p in phases.values()),
        'simulated_time': sum(p['simulated_time'] for p in phases.values()),
        'rejected': sum(p.get('rejected', 0) for p in phases.values()),
    }


def perf_row(result):
    """
    One efficiency row from a BenchmarkResult.

    Rates come from the sweep phase. ``rejected_steps`` counts step attempts
    thrown away by step halving and ``total_wall_clock`` covers every phase,
    compression included.
    """
    counters = _phase_counters(result)
    steps = counters['steps']
    iterations = counters['iterations']
    wall = counters['wall_time']
    simulated = counters['simulated_time']
    return {
        'model': result.config.model,
        'width': width_key(result.config.width_ratio),
        'n_nodes': result.config.n_nodes,
        'realtime_ratio': wall / simulated if simulated > 0 else None,
        'wall_clock': wall,
        'steps': steps,
        'iterations': iterations,
        'iterations_per_step': iterations / steps if steps else None,
        'per_iteration': wall / iterations if iterations else None,
        'rejected_steps': counters.get('rejected'),
        'total_wall_clock': sum(p['wall_time'] for p in result.phases.values()),
    }


def bench_perf(configs, runner=run_benchmark):
    """
    Efficiency report over benchmark configurations.

    Besides one row per config, the report pairs rows that differ only in
    mesh size (per-iteration time ratio, larger over smaller mesh) and rows
    that differ only in model (per-iteration overhead vs Kirchhoff, %).

    Args:
        configs (list): BenchmarkConfig objects
        runner (Callable): Runs one config and returns a BenchmarkResult

    Returns:
        dict: {'rows': [...], 'mesh_ratios': [...], 'model_overhead': [...]}
    """
    rows = []
    for config in configs:
        logger.info(f"Benchmarking {config.model} W/L={width_key(config.width_ratio)} M={config.n_nodes}")
        rows.append(perf_row(runner(config)))

    mesh_ratios = []
    for small in rows:
        for large in rows:
            same = small['model'] == large['model'] and small['width'] == large['width']
            if same and large['n_nodes'] > small['n_nodes'] and small['per_iteration'] and large['per_iteration']:
                mesh_ratios.append({
                    'model': small['model'], 'width': small['width'],
                    'n_nodes': (small['n_nodes'], large['n_nodes']),
                    'per_iteration_ratio': large['per_iteration'] / small['per_iteration'],
                })

    model_overhead = []
    baselines = {(r['width'], r['n_nodes']): r for r in rows if r['model'] == 'kirchhoff'}
    for row in rows:
        base = baselines.get((row['width'], row['n_nodes']))
        if row['model'] != 'kirchhoff' and base and base['per_iteration'] and row['per_iteration']:
            model_overhead.append({
                'model': row['model'], 'width': row['width'], 'n_nodes': row['n_nodes'],
                'overhead_percent': (row['per_iteration'] / base['per_iteration'] - 1.0) * 100.0,
            })

    return {'rows': rows, 'mesh_ratios': mesh_ratios, 'model_overhead': model_overhead}


def format_table(rows, columns=BENCH_COLUMNS):
    """Plain-text table of report rows"""
    def cell(value):
        if value is None:
            return '-'
        if isinstance(value, float):
            return f"{value:.4g}"
        return str(value)

    body = [[cell(row.get(c)) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ['  '.join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ['  '.join(v.ljust(w) for v, w in zip(r, widths)) for r in body]
    return '\n'.join(lines)
