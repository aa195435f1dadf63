"""Error metrics."""
import numpy as np

V_MAX = 1150.0


def nrmse(pred, truth, v_max: float = V_MAX) -> float:
    """Root-mean-squared error as a percentage of the maximum tumour volume."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size == 0 or pred.shape != truth.shape:
        raise ValueError(f"nrmse needs equal-length nonempty inputs, got {pred.shape} and {truth.shape}")
    return float(100.0 * np.sqrt(np.mean((pred - truth) ** 2)) / v_max)
