import os
import sys

# BLAS pools are sized at import time, so the cap must be applied before numpy loads.
_cap = os.environ.get("FNN_FORGE_THREADS")
if _cap and _cap.isdigit():
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _cap)

from fnn_forge.cli import main  # noqa: E402

sys.exit(main())
