"""Dataset ingestion, file formats and synthetic data."""
from .formats import (
    FeatureSet,
    features_from_bytes,
    features_to_bytes,
    model_from_bytes,
    model_to_bytes,
    read_features,
    read_model,
    write_features,
    write_model,
)
from .images import list_bscans, read_image, write_image
from .manifest import CLASSES, DatasetManifest, ManifestRow, load_manifest, write_manifest
from .synthetic import SyntheticData, SyntheticSpec, generate_synthetic, synthetic_bscan, synthetic_volumes
