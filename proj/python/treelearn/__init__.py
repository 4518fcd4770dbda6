"""Layerwise learning of tree-structured Boolean circuits."""

import json as _json

from . import _core
from ._core import Circuit, TreelearnError, fm_circuit, parity_circuit, random_circuit

__version__ = _core.__version__

__all__ = [
    "Circuit",
    "TreelearnError",
    "certify",
    "distribution_chain",
    "fm_circuit",
    "parity_circuit",
    "random_circuit",
    "random_quantized_net",
    "rank_bound_check",
    "run_figure1",
    "run_lemma_suite",
    "sample",
    "train_layerwise",
    "verify_recovery",
]


def _text(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def generative_spec(circuit):
    return {"kind": "generative", "circuit": _json.loads(circuit.to_json())}


def product_spec(circuit, p):
    return {"kind": "product", "p": p, "circuit": _json.loads(circuit.to_json())}


def sample(spec, count, seed=0):
    """List of (x, y) pairs with x a list of -1/+1."""
    return _core.sample(_text(spec), count, seed)


def distribution_chain(spec):
    return _json.loads(_core.distribution_chain(_text(spec)))


def certify(spec, delta=0.0):
    return _json.loads(_core.certify(_text(spec), delta))


def train_layerwise(spec, seed=0, delta_fail=0.01, overrides=None, threads=1):
    """Population-mode training; returns config, train trace, recovery and checkpoint."""
    return _json.loads(_core.train_layerwise(_text(spec), seed, delta_fail, _text(overrides or {}), threads))


def verify_recovery(checkpoint, spec):
    return _json.loads(_core.verify_recovery(_text(checkpoint), _text(spec)))


def run_lemma_suite(scope="all", depth=3, seed=0, threads=1, negative_controls=True):
    return _json.loads(_core.run_lemma_suite(scope, depth, seed, threads, negative_controls))


def rank_bound_check(net):
    return _json.loads(_core.rank_bound_check(_text(net)))


def random_quantized_net(half_inputs, k, B, seed=0):
    return _json.loads(_core.random_quantized_net(half_inputs, k, B, seed))


def run_figure1(config=None):
    return _json.loads(_core.run_figure1(_text(config or {})))
