"""Bridge from pretrained classifiers to the zoodetect bundle format."""

from .export import ExportJob, ExportResult, VerifyReport, export, verify
from .formats import read_zfm1, read_zfm1_header, write_zfm1
from .models import FeatureTap, ToyCnn, build_model

__version__ = "0.1.0"

__all__ = [
    "ExportJob",
    "ExportResult",
    "FeatureTap",
    "ToyCnn",
    "VerifyReport",
    "build_model",
    "export",
    "read_zfm1",
    "read_zfm1_header",
    "verify",
    "write_zfm1",
]
