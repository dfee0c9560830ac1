"""Build the optional compiled kernels.

If Cython or a C compiler is unavailable the package still installs and
``cherryrec.kernels`` falls back to the pure-Python implementations.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("CHERRYREC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "cherryrec.kernels._ckernels",
                    ["src/cherryrec/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # keep a*b+c unfused so both backends round identically
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"cherryrec: skipping compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
