"""Multi-sample spatially variable gene detection."""

from ._core import (
    DataError,
    DomainError,
    IoError,
    NumericalError,
    bfdr,
    bfdr_threshold,
    default_bfdr_level,
    detect,
    digamma,
    eval_basis,
    fit_gene,
    jaccard,
    log_h_integral,
    normalize_coords,
    read_report,
    select_genes,
    simulate,
    trigamma,
)

__version__ = "0.1.0"
