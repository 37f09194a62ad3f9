"""Coherence-minimizing frame preconditioners via structured conic optimization.

Subpackages by role:

- :mod:`framecond.numerics` -- dense linear-algebra kernels with contracts
- :mod:`framecond.frames` -- frame type, generators, coherence metrics
- :mod:`framecond.conic` -- structured primal-dual interior-point solver
- :mod:`framecond.precondition` -- coherence programs, preconditioner
  extraction, tight-frame projection, improvement certificates
- :mod:`framecond.recovery` -- orthogonal matching pursuit, basis pursuit,
  noise amplification bounds
- :mod:`framecond.experiments` -- seeded coherence tables, phase diagrams,
  condition sweeps
- :mod:`framecond.cli` -- command-line front end and file formats
"""

from . import conic, frames, numerics
from .frames import (
    Frame,
    FrameReport,
    coherence,
    coherence_pair,
    frame_report,
    random_gaussian_frame,
    recovery_bound,
    rip_constant_estimate,
    welch_bound,
)

__version__ = "0.1.0"

__all__ = [
    "Frame",
    "FrameReport",
    "coherence",
    "coherence_pair",
    "frame_report",
    "random_gaussian_frame",
    "recovery_bound",
    "rip_constant_estimate",
    "welch_bound",
    "conic",
    "frames",
    "numerics",
]
