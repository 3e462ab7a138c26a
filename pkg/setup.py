import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Keep installing when no C compiler is around; the numpy kernel takes over."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


# Tuned for the build host by default; set NCODLAB_ARCH_FLAGS="" (or e.g.
# "-mavx2 -mfma") for a binary that must run on other machines.
ARCH_FLAGS = os.environ.get("NCODLAB_ARCH_FLAGS", "-march=native").split()

extensions = [
    Extension(
        "ncodlab._fast",
        ["src/ncodlab/_fast.pyx"],
        depends=["src/ncodlab/_tile.h"],
        include_dirs=[np.get_include(), "src/ncodlab"],
        extra_compile_args=["-O3", *ARCH_FLAGS],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
    cmdclass={"build_ext": optional_build_ext},
)
