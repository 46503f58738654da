"""Joint frequency/image-space convolutional networks for Fourier imaging.

The package is a small self-contained stack: a numpy autodiff engine
(:mod:`jointrec.tensor`), centered unitary FFTs (:mod:`jointrec.fourier`),
k-space corruption simulators (:mod:`jointrec.corruption`), the four
network variants (:mod:`jointrec.models`), differentiable losses and
image-quality metrics (:mod:`jointrec.losses`), and a training and
evaluation harness with a CLI (:mod:`jointrec.harness`).
"""

__version__ = "0.1.0"
