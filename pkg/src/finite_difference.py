"""
Finite Difference Module
Central-difference reference derivatives for the derivative checks
"""

import numpy as np

DEFAULT_RELATIVE_STEP = 1e-6


def _steps(x, relative_step, absolute_floor):
    return relative_step * np.maximum(absolute_floor, np.abs(x))


def central_gradient(f, x, relative_step=DEFAULT_RELATIVE_STEP, absolute_floor=1.0):
    """
    Central-difference gradient of a scalar function.

    The step of entry i is ``relative_step * max(absolute_floor, |x_i|)``.

    Args:
        f (Callable): x -> float
        x (np.ndarray): Evaluation point (1-D)
        relative_step (float): Step relative to the entry magnitude
        absolute_floor (float): Magnitude used for small entries

    Returns:
        np.ndarray: Gradient with the shape of ``x``
    """
    x = np.asarray(x, dtype=float)
    steps = _steps(x, relative_step, absolute_floor)
    grad = np.empty_like(x)
    for i in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[i] += steps[i]
        backward[i] -= steps[i]
        grad[i] = (f(forward) - f(backward)) / (2.0 * steps[i])
    return grad


def central_jacobian(f, x, relative_step=DEFAULT_RELATIVE_STEP, absolute_floor=1.0):
    """
    Central-difference Jacobian of a vector function.

    Returns:
        np.ndarray: (len(f(x)), len(x)); column j is d f / d x_j
    """
    x = np.asarray(x, dtype=float)
    steps = _steps(x, relative_step, absolute_floor)
    columns = []
    for j in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[j] += steps[j]
        backward[j] -= steps[j]
        columns.append((np.asarray(f(forward), dtype=float) - np.asarray(f(backward), dtype=float))
                       / (2.0 * steps[j]))
    return np.stack(columns, axis=-1)


def relative_error(actual, expected, floor=None):
    """
    max |actual - expected| / max(|expected|, floor).

    ``floor`` defaults to 1e-12 times the largest |expected| entry (or 1).
    """
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = float(np.max(np.abs(expected))) if expected.size else 0.0
    if floor is None:
        floor = 1e-12 * scale if scale > 0 else 1.0
    return float(np.max(np.abs(actual - expected)) / max(scale, floor))
