from .covariance import (
    CovarianceState,
    new_covariance,
    rank1_update,
    refresh_inverse,
    quadratic_form,
    quadratic_forms,
    solve,
    detect_doubling,
    doubling_bound,
)
