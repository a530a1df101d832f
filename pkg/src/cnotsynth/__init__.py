"""CNOT circuit synthesis for linear reversible circuits over GF(2).

Bit-packed matrix algebra, PMH synthesis, Gaussian striping
and embedding for size adaptation, an exact BFS oracle for small n, a PPO
policy trained on a curriculum, and the benchmark harness tying them together.
"""

from .circuit import Circuit, CnotGate, SynthesisResult, verify_solves
from .gf2core import BitMatrix

__version__ = "0.1.0"

__all__ = ["BitMatrix", "Circuit", "CnotGate", "SynthesisResult", "verify_solves", "__version__"]
