"""Build script: compiles the Cython kernel core when possible.

The package works without the extension (hotwall._kernels falls back to the
numpy implementation), so a failed compile must not fail the install.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "hotwall._ckernels",
                sources=["src/hotwall/_ckernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - depends on build environment
    print(f"hotwall: skipping compiled kernels ({exc}); pure-python fallback will be used")

setup(ext_modules=ext_modules)
