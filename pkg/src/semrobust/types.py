"""
Type definitions and aliases for the semrobust package.
"""

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

# Latent-space quantities
LatentVector = FloatArray  # w or eta, shape (d,)
Coefficients = FloatArray  # delta, shape (N,)

# Identity / class labels
ClassLabel = int
IdentityId = int

# Enumerated string options
LossKind = str  # "cross_entropy", "margin"
AttackMethod = str  # "pgd", "fab"
StepRule = str  # "steepest", "gradient"
SmoothingMode = str  # "isotropic", "anisotropic"
RankingAggregator = str  # "column_sum", "mean_rank"
