"""Backend selection for the trajectory kernels.

The compiled extension is used when it imports; setting
``TCILAB_PURE_PYTHON=1`` forces the pure-Python twin.
"""
import os

from . import _kernel_py

if os.environ.get("TCILAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernel_py
    BACKEND = "python"
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernel_py
        BACKEND = "python"

simulate_patient = _impl.simulate_patient
rollout = _impl.rollout
one_step_all_options = _impl.one_step_all_options
plan_rollouts = _impl.plan_rollouts

__all__ = ["BACKEND", "simulate_patient", "rollout", "one_step_all_options", "plan_rollouts"]
