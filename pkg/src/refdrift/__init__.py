"""Reference-game speaker training against calibrated listener populations."""

import os

# The workloads here are many small float64 matmuls; threaded BLAS only adds
# oversubscription once jobs run in parallel worker processes. Respect any
# value the user already exported.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del os, _var

__version__ = "0.1.0"
