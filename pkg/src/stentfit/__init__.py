"""stentfit: vessel segmentation, centerline extraction, deformable
stent-graft simulation and AAA measurement."""

from .config import PipelineConfig
from .pipeline import PipelineResult, run_pipeline
from .service import create_app

__version__ = "0.1.0"

__all__ = ["PipelineConfig", "PipelineResult", "run_pipeline", "create_app",
           "__version__"]
