"""Batched multi-guiding spark fireworks algorithm with MLP black-box benchmarks."""

from .core import EvalBackend, argmin_per_population, batch_cube, batched_apply
from .engine import (FireworkState, MgfwaConfig, RunRecord, SearchSpace, explode,
                     guiding_vector, initialize, loser_out, multi_guiding_sparks,
                     random_mapping, run, select_best, update_amplitudes)
from .nets import (REGISTRY, MlpBlackBox, NetSpec, Sphere, build_net, forward, gelu,
                   get_spec, net_from_json, net_to_json, param_count, relu, sphere)
from .rng import RngKey, Stream, uniform_sample

__version__ = "0.1.0"
