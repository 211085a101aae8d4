"""Out-of-time-order correlators, Lyapunov exponents and local instabilities.

Classical Hamiltonian dynamics on symplectic charts, two quantum models
(coupled large spins and a Bose-Hubbard ring) and the fitting machinery
that compares quantum OTOC growth rates with classical exponents.
"""
__version__ = "0.1.0"
