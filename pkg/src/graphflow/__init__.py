"""Semi-supervised node classification on graphs: label propagation, graph
convolutional networks, and their combination through learnable edge weights,
plus small-graph verifiers for the influence and smoothing properties that
motivate the combination."""

__version__ = "0.1.0"
