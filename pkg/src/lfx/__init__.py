"""lfx: light-field subspace algebra, synthetic optics, and super-resolution.

Modules:
  core      canonical [c, u, v, y, x] container and 2D-subspace views
  optics    layered-scene renderer and epipolar geometry oracles
  autodiff  reverse-mode tensor engine with Adam and checkpoints
  model     ensemble feature extractor, X-masked attention, SR networks
  pipeline  degradation, augmentation, metrics, training, dataset IO
  cli       command-line surface over all of the above
"""

__version__ = "0.1.0"
