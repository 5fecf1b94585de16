"""Input-constrained barrier verification, class-K_e design, probabilistic
Lie-derivative learning, and QP/SOCP safety filtering."""

__version__ = "0.1.0"
