import os

import numpy as np
from setuptools import Extension, setup

# FRONTLAB_NO_EXT=1 builds a pure-Python install that always uses the numpy fallback
if os.environ.get("FRONTLAB_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "frontlab._kernels",
                ["src/frontlab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
