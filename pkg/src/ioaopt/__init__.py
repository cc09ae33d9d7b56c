"""Exact global optimization of mixed-integer programs whose objective
carries separable inverse-S-shaped cost terms, via an inner-outer
approximation loop over concave/convex curve halves."""

from ioaopt import approx, datagen, flp, ioa, milp, scurve

__all__ = ["approx", "datagen", "flp", "ioa", "milp", "scurve"]
__version__ = "0.1.0"
