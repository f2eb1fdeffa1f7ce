"""Minimal estimator base class with sklearn-compatible get_params/set_params.

Kept dependency-free on purpose: anything that implements this pair of
methods participates in sklearn-style cloning, grid search and pipelines.
"""

import inspect

from .errors import SurfPdeError


class NotFittedError(SurfPdeError, AttributeError):
    """Estimator method requires a prior successful fit()."""


class BaseEstimator:
    """Parameter introspection following the sklearn convention.

    Subclasses declare every tunable in ``__init__`` keyword arguments and
    store them verbatim on ``self``; fitted state uses trailing-underscore
    attribute names.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}; "
                    f"valid parameters: {sorted(valid)}"
                )
            setattr(self, key, value)
        return self

    def __repr__(self):
        parts = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({parts})"


def check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
