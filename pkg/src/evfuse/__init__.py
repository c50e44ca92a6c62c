"""Event-driven video frame synthesis.

Fuses low-framerate intensity frames with event-camera data to recover a
high-framerate video by differentiable model-based reconstruction.
"""

from .binning import BinningResult, bin_conflict_driven, bin_stacked, stack_frames
from .events import (
    Event,
    EventFrameTensor,
    EventStream,
    ThresholdParams,
    event_density,
    fire_events,
    forward_event_model,
    simulate_stream,
    tanh_event_frame,
)
from .kernels import BACKEND
from .metrics import error_map, psnr, ssim
from .sensing import FusionProblem, HighResTensor, Observation, SensingCase, forward_intensity, make_problem
from .solver import (
    SolverConfig,
    SolveTrace,
    gradient,
    initialize,
    objective,
    pixel_loss,
    solve,
    tv_loss,
)

__version__ = "0.1.0"
