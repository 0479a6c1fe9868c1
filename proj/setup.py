"""Builds the bridgebench._core extension by delegating to the CMake tree."""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str, sourcedir: str = "") -> None:
        super().__init__(name, sources=[])
        self.sourcedir = os.fspath(Path(sourcedir).resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        extdir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        build_temp = Path(self.build_temp) / ext.name
        build_temp.mkdir(parents=True, exist_ok=True)

        cfg = "Debug" if int(os.environ.get("DEBUG", "0")) else "Release"
        cmake_args = [
            f"-DCMAKE_BUILD_TYPE={cfg}",
            f"-DPython_EXECUTABLE={sys.executable}",
            "-DBRIDGEBENCH_BUILD_TESTS=OFF",
            "-DBRIDGEBENCH_BUILD_CLI=OFF",
            "-DBRIDGEBENCH_BUILD_PYTHON=ON",
            f"-DBRIDGEBENCH_PYTHON_OUTPUT_DIR={extdir}",
        ]
        jobs = str(os.cpu_count() or 2)
        subprocess.run(["cmake", ext.sourcedir, *cmake_args], cwd=build_temp, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", "-j", jobs],
            cwd=build_temp,
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("bridgebench._core")],
    cmdclass={"build_ext": CMakeBuild},
    zip_safe=False,
)
