"""Builds the optional compiled kernel extension.

The package works without it: clair_eval.kernels falls back to the pure-Python
implementations when the extension is absent (see benchmarks/bench_kernels.py
for the speed difference).
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("clair_eval._ckernels", ["src/clair_eval/_ckernels.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
