"""Evaluation toolkit for document and user geolocation systems."""

from ._geoloceval import (
    EARTH_RADIUS_KM,
    AdminPath,
    ConfigError,
    Error,
    GeocodeError,
    GeoPoint,
    IoError,
    TestResult,
    ValidationError,
    acc_at,
    auc,
    evaluate,
    great_circle_distance,
    kendall_tau_b,
    macro_sign_test,
    macro_t_test,
    mean_error,
    median_error,
    medoid,
    micro_sign_test,
    proportions_z_test,
    rescore,
    score_labels,
    wilcoxon_test,
)

__all__ = [
    "EARTH_RADIUS_KM",
    "AdminPath",
    "ConfigError",
    "Error",
    "GeocodeError",
    "GeoPoint",
    "IoError",
    "TestResult",
    "ValidationError",
    "acc_at",
    "auc",
    "evaluate",
    "great_circle_distance",
    "kendall_tau_b",
    "macro_sign_test",
    "macro_t_test",
    "mean_error",
    "median_error",
    "medoid",
    "micro_sign_test",
    "proportions_z_test",
    "rescore",
    "score_labels",
    "wilcoxon_test",
]
