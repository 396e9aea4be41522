"""Attribute-based recognition of composite activities.

The package turns low-level evidence (pose tracks, script text) into
attribute scores, pools them over time, and classifies composite
activities with supervised, nearest-neighbour, and zero-shot transfer
models.  Modules:

- ``corpus``      textual script mining: tokenisation, attribute matching,
                  frequency and tf*idf weight matrices
- ``posefeat``    pose trajectory features (direction histograms, spectral
                  descriptors), codebooks, bag-of-words encoding
- ``attributes``  linear attribute classifiers plus context / co-occurrence
                  score stacking
- ``composites``  sequence-level pooling and composite classification
                  (SVM, NN, script transfer, label propagation)
- ``temporal``    sliding-window detection, integral histograms,
                  non-maximum suppression, agglomerative segmentation
- ``psinfer``     pictorial-structures inference over part likelihood grids
- ``synth`` / ``metrics`` / ``experiment`` / ``cli``
                  synthetic data, evaluation, experiment orchestration
"""

__version__ = "0.1.0"
