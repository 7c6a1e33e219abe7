import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dqdsim._step_kernel",
                ["src/dqdsim/_step_kernel.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-Python propagator is used when the extension is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
