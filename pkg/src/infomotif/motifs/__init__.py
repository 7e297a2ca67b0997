"""Three-node motif patterns, instance enumeration and sampling."""
from .index import BACKEND, InstanceIndex, MotifInstances, connected_triples, enumerate_instances
from .oracle import brute_force_count, brute_force_instances
from .registry import (MotifPattern, MotifRegistry, RegistryError, default_registry,
                       load_registry, make_pattern, save_registry)
from .sampling import (NegativeSample, SamplingError, sample_negative, sample_negative_batch,
                       sample_positive, sample_positive_batch)

__all__ = [
    "BACKEND", "InstanceIndex", "MotifInstances", "MotifPattern", "MotifRegistry",
    "NegativeSample", "RegistryError", "SamplingError", "brute_force_count",
    "brute_force_instances", "connected_triples", "default_registry", "enumerate_instances",
    "load_registry", "make_pattern", "sample_negative", "sample_negative_batch", "sample_positive",
    "sample_positive_batch", "save_registry",
]
