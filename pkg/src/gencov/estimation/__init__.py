"""Covariance estimators, Lasso solvers and graph selection."""
from .covariance import *  # noqa: F401,F403
from .covariance import __all__ as _cov_all
from .glasso import *  # noqa: F401,F403
from .glasso import __all__ as _glasso_all
from .lasso import *  # noqa: F401,F403
from .lasso import __all__ as _lasso_all
from .selection import *  # noqa: F401,F403
from .selection import __all__ as _sel_all

__all__ = [*_cov_all, *_glasso_all, *_lasso_all, *_sel_all]
