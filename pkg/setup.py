"""Build script: compiles the transport kernel extension when Cython and a C
toolchain are available.  Set SEMSEARCH_PURE_PYTHON=1 to skip the extension;
the package then runs on the pure-Python kernel selected at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SEMSEARCH_PURE_PYTHON"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "semsearch.transport._kernel",
                    ["src/semsearch/transport/_kernel.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
