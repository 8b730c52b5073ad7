"""Multi-target detection and localisation for distributed MIMO radar with
non-ideal waveform correlation: iterative subspace detector (MSD-IS),
MF+SIC and single-target GLRT references, and a Monte Carlo harness."""

from .detector import DetectionReport, GicParams, run_msdis
from .geometry import C0, FineGrid, RadarLayout, SearchGrid
from .model import RadarModel

__all__ = ["C0", "DetectionReport", "FineGrid", "GicParams", "RadarLayout", "RadarModel", "SearchGrid", "run_msdis"]
