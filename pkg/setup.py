import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Fallback-equivalence tests compare the compiled kernel bit-for-bit with the
# pure-Python engine, so floating-point contraction must stay off.
extra_compile_args = ["-O3", "-ffp-contract=off", "-fno-fast-math"]
if os.name == "nt":
    extra_compile_args = ["/O2", "/fp:precise"]

extensions = [
    Extension(
        "critical_hawkes.engine._kernel",
        ["src/critical_hawkes/engine/_kernel.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=extra_compile_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    ),
)
