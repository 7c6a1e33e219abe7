"""Electrode-controlled Si/SiGe double-quantum-dot spin-qubit simulator.

Subpackages by concern:
  device        geometry, materials, Poisson electrostatics
  schrodinger   effective-mass eigenstates and the self-consistent loop
  dots          dot finding, Zeeman splittings, exchange coupling, stability
  noise         quasi-static charge-noise sampling and statistics
  dynamics      two-spin Hamiltonian, propagators, gate fidelity
  protocols     pulse-schedule compilation (RY, virtual Z, U, CZ, CNOT)
  cli           the dqd-sim experiment runner
"""

__version__ = "0.1.0"
