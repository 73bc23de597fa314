from setuptools import Extension, setup

# The compiled core is optional: when Cython (or a C compiler) is missing the
# package falls back to the pure-Python twin at import time.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("streamsim._cache_core", ["src/streamsim/_cache_core.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
