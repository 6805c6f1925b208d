"""Custom types used for type hinting in the perfedavg simulator package."""

from typing import Callable, Union

import numpy as np
from numpy.typing import NDArray

# Scalar value that can be an integer or a float
Scalar = Union[int, float]

# Dense real vector of dimension d holding model parameters or any gradient-like quantity
ParamVector = NDArray[np.float64]

# Dense real matrix, e.g. the curvature of a quadratic task
Matrix = NDArray[np.float64]

# Scalar field on parameter space, e.g. a loss or meta-loss evaluated at w
ScalarField = Callable[[ParamVector], float]

# Vector field on parameter space, e.g. an exact gradient oracle
VectorField = Callable[[ParamVector], ParamVector]
