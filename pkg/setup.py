import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to NumPy
# implementations at import time if the extension is missing.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ringlab._accel",
                ["src/ringlab/_accel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
