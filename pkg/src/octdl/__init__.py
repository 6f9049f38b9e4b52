"""OCT B-scan classification with discriminative dictionary learning."""
__version__ = "0.1.0"
