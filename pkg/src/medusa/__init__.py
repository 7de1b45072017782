"""Jellyfish motion-capture analysis and reservoir-computing prediction toolkit."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    criticality,
    esp,
    ingest,
    kinematics,
    reservoir,
    response,
    sensorsearch,
    synthgen,
)
from .errors import MedusaError  # noqa: F401
