"""Central finite-difference check of reverse-mode gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ContractError, gradients, iter_graph


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict
    coords_checked: int

    def passed(self, tol=1e-4) -> bool:
        return self.max_rel_error < tol


def relative_error(a, b, floor=1e-6):
    """``|a - b| / max(|a|, |b|, floor)``; the floor keeps near-zero entries
    from dominating through round-off."""
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(loss_fn, params: dict, eps=1e-4, max_coords=64, seed=0) -> GradCheckReport:
    """Compare adjoints of ``loss_fn()`` with central differences.

    ``loss_fn`` rebuilds the scalar loss from the current parameter values.
    At most ``max_coords`` random coordinates per parameter are probed.
    Refuses float32 parameters and graphs that contain active dropout.
    """
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise ContractError(f"grad_check requires float64 parameters ({name!r})")
    loss = loss_fn()
    if any(t.op == "dropout" for t in iter_graph(loss)):
        raise ContractError("grad_check refused: dropout is active in the loss graph")
    analytic = gradients(loss, params)
    rng = np.random.default_rng(seed)
    per_param = {}
    total = 0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        k = min(max_coords, flat.size)
        coords = rng.choice(flat.size, size=k, replace=False)
        worst = 0.0
        for i in coords:
            old = flat[i]
            flat[i] = old + eps
            up = float(loss_fn().data)
            flat[i] = old - eps
            down = float(loss_fn().data)
            flat[i] = old
            num = (up - down) / (2 * eps)
            worst = max(worst, float(relative_error(analytic[name].reshape(-1)[i], num)))
        per_param[name] = worst
        total += k
    return GradCheckReport(max(per_param.values(), default=0.0), per_param, total)
