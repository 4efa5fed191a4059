from .predictor import PredictorConfig, RemotePredictor, builtin_predict, otsu_threshold
from .service import create_app

__all__ = [
    "PredictorConfig",
    "RemotePredictor",
    "builtin_predict",
    "otsu_threshold",
    "create_app",
]
