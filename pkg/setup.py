import os
import sys

import numpy as np
from setuptools import Extension, setup

# Set QSMOOTH_NO_EXT=1 to install the pure-Python fallback only.
ext_modules = []
if not os.environ.get("QSMOOTH_NO_EXT"):
    from Cython.Build import cythonize

    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext_modules = cythonize(
        [
            Extension(
                "qsmooth._kernels",
                ["src/qsmooth/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"] + openmp,
                extra_link_args=openmp,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
