"""8-bit approximate numeric formats and the tooling built around them.

Four fixed 256-entry codecs plus a 1-bit error-feedback quantizer, an
empirical error benchmark, an analytical multi-GPU speedup model, and a
small MLP trainer that can inject any codec into its gradient or
activation streams to measure the accuracy cost.
"""

from .codecs import (
    Codebook,
    DataTypeKind,
    DataTypeSpec,
    NormKind,
    OneBitState,
    QuantizedTensor,
    build_codebook,
    decode_buffer,
    encode_buffer,
    onebit_decode,
    onebit_quantize,
    roundtrip,
)
from .datasets import Dataset, digits_dataset, load_dataset_dir, one_hot, write_dataset_dir
from .errorbench import ErrorReport, SampleSpec, measure_error, run_error_suite
from .errors import ApproxError, ConfigError, InputError, TrainingError, UsageError
from .mlp import (
    HookMode,
    MlpConfig,
    ParityResult,
    ParityRow,
    QuantHookConfig,
    TrainReport,
    default_hook_spec,
    format_parity_table,
    glorot_init,
    network_gradients,
    network_loss,
    parity_experiment,
    parity_to_csv,
    train,
)
from .perfmodel import (
    HardwareProfile,
    ParallelPlan,
    PerfConfig,
    SpeedupReport,
    load_perf_config,
    predict_cluster,
    predict_single_node,
    sweep_sub_batch,
)
from .tensorfile import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "ApproxError",
    "Codebook",
    "ConfigError",
    "Dataset",
    "DataTypeKind",
    "DataTypeSpec",
    "ErrorReport",
    "HardwareProfile",
    "HookMode",
    "InputError",
    "MlpConfig",
    "NormKind",
    "OneBitState",
    "ParallelPlan",
    "ParityResult",
    "ParityRow",
    "PerfConfig",
    "QuantHookConfig",
    "QuantizedTensor",
    "SampleSpec",
    "SpeedupReport",
    "TrainReport",
    "TrainingError",
    "UsageError",
    "build_codebook",
    "decode_buffer",
    "default_hook_spec",
    "digits_dataset",
    "encode_buffer",
    "format_parity_table",
    "glorot_init",
    "load_dataset_dir",
    "load_perf_config",
    "measure_error",
    "network_gradients",
    "network_loss",
    "one_hot",
    "onebit_decode",
    "onebit_quantize",
    "parity_experiment",
    "parity_to_csv",
    "predict_cluster",
    "predict_single_node",
    "read_tensor",
    "roundtrip",
    "run_error_suite",
    "sweep_sub_batch",
    "train",
    "write_dataset_dir",
    "write_tensor",
    "__version__",
]
