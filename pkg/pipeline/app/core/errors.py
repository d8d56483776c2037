from typing import Optional


class AnnotationToolError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    exit_code = 1

    def __init__(self, detail: str, case_id: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        self.case_id = case_id

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "detail": self.detail,
            "case_id": self.case_id,
        }


class VolumeFormatError(AnnotationToolError):
    """Malformed header/payload pair or invalid volume geometry."""


class ConfidenceRangeError(VolumeFormatError):
    """A confidence volume holds values outside [0, 1]."""


class GridMismatchError(AnnotationToolError):
    """Two volumes (or a candidate and a volume) do not share a grid."""


class ConfigurationError(AnnotationToolError):
    """Invalid configuration file, flag or environment value."""


class ManifestError(AnnotationToolError):
    """Case manifest could not be parsed or resolved."""


class ReportFormatError(AnnotationToolError):
    """Report text unusable as input (for example an empty body)."""


class NoScoresFound(AnnotationToolError):
    """A report section holds no PI-RADS, T2W, DWI or DCE score."""


class ExtractionError(AnnotationToolError):
    """Candidate extraction received input it cannot work on."""


class MetricError(AnnotationToolError):
    """A metric is undefined for the given input."""


class UnreachableOperatingPoint(MetricError):
    """The requested operating point lies outside the curve."""


class StatisticsError(AnnotationToolError):
    """Resampling statistics received unusable groups or settings."""


class EfficiencyError(AnnotationToolError):
    """Annotation-efficiency interpolation is not defined for the input."""


class PhantomSpecError(AnnotationToolError):
    """Synthetic phantom or scenario description is invalid."""
