"""Bound quantities entering the gain condition, gathered over all experts."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dgp_fusion import aggregate_norms
from ..gp_expert import GpExpert
from .config import GpSettings
from .simulate import expert_reports

REFERENCE_L_MU = 3.3
REFERENCE_GAMMA_SQ = 10.0


def gain_condition_report(experts: Sequence[GpExpert], gp: GpSettings) -> dict:
    """Per-drone and network-level ``L_mu``, ``Delta_bar``, ``gamma^2`` and ``beta``.

    Network values take the worst drone per channel, then the Euclidean norm
    over channels. The gain condition itself is not evaluated.
    """
    reports = expert_reports(experts, gp)
    l_mu = np.max([r.l_mu for r in reports], axis=0)
    l_emp = np.max([r.l_mu_empirical for r in reports], axis=0)
    delta_bar = np.max([r.delta_bar for r in reports], axis=0)
    l_norm, d_norm = aggregate_norms(l_mu, delta_bar)
    l_emp_norm, _ = aggregate_norms(l_emp, delta_bar)
    return {
        "delta": gp.delta,
        "beta_formula": gp.beta_formula,
        "drones": [{"drone": i, **r.to_json()} for i, r in enumerate(reports)],
        "network": {
            "l_mu": l_norm,
            "l_mu_empirical": l_emp_norm,
            "delta_bar": d_norm,
            "l_mu_per_channel": l_mu.tolist(),
            "l_mu_empirical_per_channel": l_emp.tolist(),
            "delta_bar_per_channel": delta_bar.tolist(),
            "gamma_sq_max": float(np.max([r.gamma_sq for r in reports])),
        },
        "reference": {
            "l_mu": REFERENCE_L_MU,
            "gamma_sq": REFERENCE_GAMMA_SQ,
            "l_mu_ratio": l_norm / REFERENCE_L_MU,
        },
    }
