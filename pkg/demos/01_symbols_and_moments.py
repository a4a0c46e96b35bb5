"""Wigner symbols, their sum rules, and the Gaussian moments of the
normalised bispectrum computed three ways."""
from spherebispec.diagrams import moment_bruteforce
from spherebispec.estimators import moment_I4_offdiag, moment_Ihat
from spherebispec.identities import orthonormality_residual, sixj_contraction_residual
from spherebispec.wigner import wigner_3j, wigner_3j_exact, wigner_6j

print("3j (2 2 2; 0 0 0)      fast:", wigner_3j(2, 2, 2, 0, 0, 0), " exact:", wigner_3j_exact(2, 2, 2, 0, 0, 0))
print("3j (100 60 80; 3 -20 17):", wigner_3j(100, 60, 80, 3, -20, 17))
print("6j {2 3 5; 2 3 5}:", wigner_6j(2, 3, 5, 2, 3, 5))
print("sum rule residual at (20, 30, 40):", orthonormality_residual(20, 30, 40))
print("6j from four 3j symbols, residual:", sixj_contraction_residual(2, 3, 5, 2, 3, 5))

print()
print("E I^4 at (2,3,5): closed form", moment_I4_offdiag(2, 3, 5))
print("                  sum over all 10395 pairings", moment_bruteforce(2, 2, 3, 5))
print("E Ihat^2 at (4,4,4) with the estimated spectrum:", moment_Ihat(4, 4, 4, 1), "(486/143 =", 486 / 143, ")")
