"""
Runner Module
Executes benchmark configurations and converts outcomes into result
dictionaries; independent configurations run in parallel processes
"""

import asyncio
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import config
from .errors import RibbonError
from .logger import get_logger
from .references import width_key
from .scenarios import run_benchmark
from .trace_io import RunManifest, write_diagnostics, write_trace

logger = get_logger(__name__)


def result_stem(benchmark_config):
    """File stem of a run, e.g. 'sano_shear_W1-12_M45_s0'"""
    width = width_key(benchmark_config.width_ratio).replace('/', '-')
    return (f"{benchmark_config.model}_{benchmark_config.sweep}_W{width}"
            f"_M{benchmark_config.n_nodes}_s{benchmark_config.seed}")


def run_config(benchmark_config):
    """
    Run one benchmark and never raise.

    Args:
        benchmark_config (BenchmarkConfig): Configuration to run

    Returns:
        dict: {'success': True, 'data': BenchmarkResult} or
              {'success': False, 'error': category, 'error_message': message}
    """
    try:
        result = run_benchmark(benchmark_config)
        return {'success': True, 'data': result}
    except RibbonError as e:
        logger.error(f"{result_stem(benchmark_config)} failed ({e.category}): {e}")
        return e.to_result()
    except Exception as e:
        logger.error(f"{result_stem(benchmark_config)} crashed: {e}", exc_info=True)
        return {
            'success': False,
            'error': 'internal',
            'error_message': str(e),
        }


def save_result(result, out_dir=None):
    """
    Write trace, manifest sidecar and diagnostics of a BenchmarkResult.

    Returns:
        dict: {'trace': Path, 'diagnostics': Path}
    """
    out_dir = Path(out_dir or config.OUT_DIR)
    stem = result_stem(result.config)
    manifest = RunManifest.for_result(result)
    trace_path = write_trace(result.trace, manifest, out_dir / f"{stem}.csv")
    diagnostics_path = write_diagnostics(result.diagnostics, out_dir / f"{stem}.steps.csv")
    return {'trace': trace_path, 'diagnostics': diagnostics_path}


async def run_batch(configs, max_workers=None, worker=run_config, executor_cls=ProcessPoolExecutor):
    """
    Run independent configurations concurrently.

    Args:
        configs (list): BenchmarkConfig objects
        max_workers (int): Pool size (default: RIBSIM_THREADS)
        worker (Callable): Picklable function taking one config
        executor_cls (type): Executor class for the pool

    Returns:
        list: Result dictionaries, in the order of ``configs``
    """
    configs = list(configs)
    if not configs:
        return []
    max_workers = max_workers or min(config.THREADS, len(configs))
    logger.info(f"Running {len(configs)} benchmark(s) on {max_workers} worker(s)")

    loop = asyncio.get_running_loop()
    with executor_cls(max_workers=max_workers) as pool:
        futures = [loop.run_in_executor(pool, worker, c) for c in configs]
        results = await asyncio.gather(*futures)

    failed = sum(1 for r in results if not r['success'])
    logger.info(f"Batch finished: {len(results) - failed} succeeded, {failed} failed")
    return list(results)
