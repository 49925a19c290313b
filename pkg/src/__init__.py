# noetherkit - verification toolkit for non-autonomous Lagrangian and Hamiltonian mechanics
