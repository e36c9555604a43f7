"""Event-based ball detection with spiking neural networks.

Pipeline: accumulate event windows into binary 64x64 frames around a dynamic
ROI, run one of three deployable network profiles over discrete time steps,
decode the two 64-neuron output populations into a pixel position. Training
uses surrogate-gradient BPTT (spiking profiles) or quantization-aware training
(single-step profile); deployment constraints are checked against device
profiles; a benchmark harness reports error and latency.
"""

from .decode import Detection, ErrorStats, decode, score
from .deploy import DeviceProfile, ValidationReport, builtin_profile, quantize_weights, validate
from .estimator import SpikingBallDetector, samples_from_arrays
from .events import (
    DatasetBundle,
    Event,
    EventFrame,
    LabeledSample,
    Roi,
    SensorGeometry,
    accumulate,
    load_dataset,
    save_dataset,
    update_roi,
)
from .network import (
    ForwardTrace,
    LayerSpec,
    NetworkSpec,
    SpikingNet,
    Weights,
    build_profile,
    forward,
    forward_ann,
    init_weights,
    load_model,
    save_model,
)
from .synth import BallSim, NoiseModel, generate, make_dataset, random_sims
from .training import (
    LossBreakdown,
    TrainConfig,
    encode_target,
    loss,
    surrogate_grad,
    train_bptt,
    train_qat,
)

__version__ = "0.1.0"

__all__ = [
    "BallSim",
    "DatasetBundle",
    "Detection",
    "DeviceProfile",
    "ErrorStats",
    "Event",
    "EventFrame",
    "ForwardTrace",
    "LabeledSample",
    "LayerSpec",
    "LossBreakdown",
    "NetworkSpec",
    "NoiseModel",
    "Roi",
    "SensorGeometry",
    "SpikingBallDetector",
    "SpikingNet",
    "TrainConfig",
    "ValidationReport",
    "Weights",
    "accumulate",
    "build_profile",
    "builtin_profile",
    "decode",
    "encode_target",
    "forward",
    "forward_ann",
    "generate",
    "init_weights",
    "load_dataset",
    "load_model",
    "loss",
    "make_dataset",
    "quantize_weights",
    "random_sims",
    "samples_from_arrays",
    "save_dataset",
    "save_model",
    "score",
    "surrogate_grad",
    "train_bptt",
    "train_qat",
    "update_roi",
    "validate",
]
