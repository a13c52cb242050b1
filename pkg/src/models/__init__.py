"""Candidate models: definitions, maximum-likelihood fits and AIC ranking."""

from src.models.fitting import count_parameters, fit_model
from src.models.scoring import aic, aicc, akaike_weights, model_averaged_prediction, rank_models
from src.models.spec import STANDARD, AicReport, FittedModel, ModelSpec, Verdict

__all__ = [
    "STANDARD",
    "AicReport",
    "FittedModel",
    "ModelSpec",
    "Verdict",
    "aic",
    "aicc",
    "akaike_weights",
    "count_parameters",
    "fit_model",
    "model_averaged_prediction",
    "rank_models",
]
