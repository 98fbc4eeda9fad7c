"""Build hook for the optional compiled stepper.

Without Cython or a C compiler the package still installs; the integrator
then runs on its numpy implementation.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("FSALPAIRS_NO_EXTENSION", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension(
                "fsalpairs._kernels",
                ["src/fsalpairs/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no fused multiply-add, so results match the numpy path
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
