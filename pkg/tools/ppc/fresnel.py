from __future__ import annotations

from typing import Tuple, Union

import numpy as np
from scipy.special import fresnel as _cephes_fresnel

Number = Union[float, np.ndarray]


def fresnel(x: Number) -> Tuple[Number, Number]:
    """
    Fresnel integrals C(x) = int_0^x cos(pi v^2 / 2) dv and S(x) = int_0^x sin(pi v^2 / 2) dv.

    Both are odd in x. Evaluated with the Cephes rational approximations
    (power series near zero, auxiliary functions f and g further out).

    Note the return order is (C, S); scipy returns (S, C).
    """
    s_val, c_val = _cephes_fresnel(x)
    if np.ndim(c_val) == 0:
        return float(c_val), float(s_val)
    return c_val, s_val
