"""Build script for the optional compiled finite-volume kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so build failures here should not block a pure-Python install:
run ``pip install -e . --no-build-isolation`` and check
``amyprion.kernels.HAVE_COMPILED`` to see which kernel you got.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "amyprion._fvkernel",
                ["src/amyprion/_fvkernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

# Layout, requirements, and the console script are stated here as well as in
# pyproject.toml so that legacy installers (setuptools < 64 cannot build
# editable wheels and falls back to ``setup.py develop``, which never reads
# pyproject metadata) still produce a working install under
# ``pip install -e . --no-build-isolation``.
setup(
    name="artifact",
    version="0.1.0",
    package_dir={"": "src"},
    packages=["amyprion"],
    python_requires=">=3.10",
    install_requires=["numpy>=1.24"],
    entry_points={"console_scripts": ["amyprion = amyprion.cli:main"]},
    ext_modules=ext_modules,
)
