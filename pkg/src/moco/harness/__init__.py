from .config import (ConfigError, ExperimentConfig, make_nested, make_noise,
                     make_problem, make_schedule, parse_config, serialize_config)
from .presets import PRESETS, preset_config
from .runner import emit_csv, parse_csv, run_bias_protocol, run_experiment, sweep
