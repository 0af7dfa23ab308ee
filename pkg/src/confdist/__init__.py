"""Split and cross-conformal predictive distributions for regression."""

from .ccps import CcpsModel, ccps_q, ccps_q_crisp, conservative_p, fit_ccps, fold_p_value, make_folds, predict_ccps
from .conformity import ConformityMeasureSpec, TrainedMeasure, train_measure
from .core import (
    DataError,
    Dataset,
    Observation,
    ScoreNotAttainable,
    StepDistribution,
    TauSource,
    eval_crisp,
    eval_fuzzy,
    quantile,
)
from .metrics import StepCDF, calibration_curve, crps_step, kolmogorov, kolmogorov_shift, kolmogorov_shift_scale, pit_values
from .regressors import RegressorSpec
from .scps import IdealConformalPredictor, ScpsModel, fit_scps, predict_scps, scps_q, scps_q_crisp
from .svaps import SvapsConfig, fit_svaps, pava, svaps_band, svaps_q

__version__ = "0.1.0"
