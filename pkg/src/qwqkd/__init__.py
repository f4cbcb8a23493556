"""Discrete-time quantum-walk simulator and one-way QKD analysis toolkit.

Subpackages cover the full pipeline: statevector/density-matrix primitives
(`corestate`), coin and preparation operators (`coinops`), circle and
hypercube walk construction (`walkgraph`), overlap/key-rate analysis
(`security`), single-qubit noise channels (`noise`), Monte-Carlo protocol
execution (`protocol`), parameter optimization (`optimizer`), and the
command-line front end (`cli`).
"""

__version__ = "0.1.0"
