import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from .classifier import Gallery, knn_classify
from .config import PipelineConfig
from .errors import DomainError
from .pipeline import Pipeline
from .schemas import Identification
from .trace import CsiTrace

logger = logging.getLogger(__name__)


class IdentificationService:
    """Identifies the subject behind every detected crossing of a trace."""

    def __init__(self, gallery_path: Union[str, Path], config: Optional[PipelineConfig] = None):
        self._gallery: Optional[Gallery] = None
        self._gallery_path = Path(gallery_path)
        self._last_error: Optional[str] = None
        self.config = config or PipelineConfig()
        self.pipeline = Pipeline(self.config)

    def _ensure_loaded(self) -> Gallery:
        if self._gallery is not None:
            return self._gallery
        try:
            self._gallery = Gallery.load(self._gallery_path)
            self._last_error = None
        except Exception as exc:
            self._last_error = str(exc)
            raise DomainError(f"gallery is not available at {self._gallery_path}: {exc}") from exc
        return self._gallery

    def identify(self, trace: CsiTrace, filtered: bool = False) -> List[Identification]:
        gallery = self._ensure_loaded()
        analysis = self.pipeline.analyze(trace, filtered=filtered)
        if not analysis.segments:
            logger.warning("no crossings detected; nothing to identify")
            return []
        results = []
        for segment, feature in zip(analysis.segments, self.pipeline.extract(analysis.components, analysis.segments)):
            result = knn_classify(feature, gallery, k=self.config.knn.k, band=self.config.dtw.band)
            results.append(
                Identification(
                    j_begin=segment.j_begin,
                    j_end=segment.j_end,
                    predicted=result.predicted,
                    neighbors=[{"subject": s, "distance": d} for s, d in result.neighbors],
                )
            )
        return results

    def reload(self, gallery_path: Union[str, Path]) -> None:
        self._gallery_path = Path(gallery_path)
        self._gallery = Gallery.load(self._gallery_path)
        self._last_error = None

    def readiness(self) -> Dict[str, Optional[str]]:
        if self._gallery is not None:
            return {"ready": True, "error": None, "gallery": str(self._gallery_path)}
        return {"ready": False, "error": self._last_error, "gallery": str(self._gallery_path)}
