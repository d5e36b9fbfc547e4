"""Python bindings for the dpglm C++ core.

Configurations are plain dicts with the same layout as the JSON files the
command line tool reads.
"""

import json as _json

from . import _dpglm
from ._dpglm import (  # noqa: F401
    Dataset,
    DpglmError,
    Model,
    ValidationError,
    compute_metrics,
    crp_partition_log_prior,
    enumerate_partitions,
    exact_posterior_expectation,
    fit_ols,
    fit_poisson_glm,
    heteroscedastic_mean,
    load_csv,
    load_model,
    model_from_bytes,
    normalize,
    synth_heteroscedastic,
    synth_spurious,
)


def _dump(config):
    return config if isinstance(config, str) else _json.dumps(config)


def validate_config(config):
    """Raise ValidationError if the configuration would be rejected."""
    _dpglm.validate_config(_dump(config))


def fit(config, data=None):
    """Run the sampler. Without `data` the configured data source is used."""
    if data is None:
        return _dpglm.fit(_dump(config))
    return _dpglm.fit_dataset(_dump(config), data)


def benchmark(config, data, threads=1):
    """Returns (raw_csv, summary_csv, table) as strings."""
    return _dpglm.benchmark(_dump(config), data, threads)


def parse_csv(text, schema):
    return _dpglm.parse_csv(text, _dump(schema))


def run_cli(*args):
    """Run the command line tool in-process; returns (exit_code, stdout, stderr)."""
    return _dpglm.run_cli([str(a) for a in args])
