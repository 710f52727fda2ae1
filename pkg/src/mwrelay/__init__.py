"""
Multi-way massive MIMO relaying with maximum-ratio processing and imperfect
channel estimates: closed-form spectral efficiency, a Monte-Carlo protocol
simulator and the studies built on both.
"""

__version__ = "0.1.0"

from .channel import (CellGeometry, ConfigError, FadingProfile, PilotBook,  # noqa: E402
                      SystemParams, estimation_moments)
from .analytics import (alpha1_closed_form, closed_form_terms, se_per_user,  # noqa: E402
                        sinr_k, two_way_se)
from .simulator import empirical_alpha, empirical_sinr, run_trials  # noqa: E402

__all__ = [
    "CellGeometry", "ConfigError", "FadingProfile", "PilotBook", "SystemParams",
    "estimation_moments", "alpha1_closed_form", "closed_form_terms", "se_per_user",
    "sinr_k", "two_way_se", "empirical_alpha", "empirical_sinr", "run_trials",
]
