"""Reference servers for the predictor and generator wire contracts."""

from .server import (
    GatewayConfig,
    create_generator_app,
    create_predictor_app,
    serve_generator,
    serve_predictor,
)

__all__ = [
    "GatewayConfig",
    "create_generator_app",
    "create_predictor_app",
    "serve_generator",
    "serve_predictor",
]
