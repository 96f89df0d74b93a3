import numpy as np
from setuptools import Extension, setup

# -O3, not -Ofast: the counter-based RNG and the reproducibility contract
# need IEEE-compliant float arithmetic.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hedgelab.kernels._native",
                ["src/hedgelab/kernels/_native.pyx"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    # No Cython available: install the pure-Python package, the numpy
    # fallback backend is selected at import time.
    extensions = []

setup(ext_modules=extensions, include_dirs=[np.get_include()])
