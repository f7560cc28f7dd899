"""Build the optional compiled kernels.

The package works without them; ``ttrram.kernels`` falls back to NumPy when
``ttrram._ckernels`` cannot be imported. To build in place::

    python3 setup.py build_ext --inplace
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: ship the pure-Python backend only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ttrram._ckernels",
                ["src/ttrram/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
