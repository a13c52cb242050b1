"""tomoguard: model selection diagnostics for quantum state tomography."""

__version__ = "0.1.0"
