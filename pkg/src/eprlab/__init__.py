"""eprlab: a simulation laboratory for entangled-prover low-degree tests.

Modules build bottom-up: gf (field arithmetic) -> rmpoly (polynomial encodings
and question spaces) -> qsim (dense states and measurements) -> games (nonlocal
game evaluation and the low-degree test family) -> css (stabilizer codes and
multi-prover routing) -> linpcp (linear proximity proofs) -> ham (Hamiltonian
forms and the energy/XZ reductions) -> harness (configs, seeds, CLI).
"""

__version__ = "0.1.0"
