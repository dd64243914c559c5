import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from capnet.network import Dataset, Layer, Network


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_net(weights, activations=None, input_dim=None):
    """Network from a list of weight arrays; default all-ReLU hidden layers."""
    weights = [np.asarray(w, dtype=np.float64) for w in weights]
    if activations is None:
        activations = ["relu"] * (len(weights) - 1) + [None]
    layers = tuple(Layer(weight=w, activation=a) for w, a in zip(weights, activations))
    return Network(layers=layers, input_dim=input_dim or weights[0].shape[1])


def sphere_points(rng, m, dim, radius=1.0):
    pts = rng.standard_normal((m, dim))
    pts *= radius / np.linalg.norm(pts, axis=1, keepdims=True)
    return Dataset(points=pts)
