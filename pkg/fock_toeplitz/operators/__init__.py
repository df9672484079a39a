"""Symbol measures, Fock bases and kernels, transforms, Toeplitz matrices and lattices."""
