"""
Installs dependencies for the cavity transport engine

Run without arguments to install the runtime and test dependencies:
    python setup.py

Any other invocation (for example through `pip install .`) installs the
package itself with its `cavity-transport` command.
"""

__version__ = "1.1.0"

import sys
import subprocess

REQUIREMENTS = ["numpy>=1.22", "scipy>=1.10", "qutip>=5.0"]
TEST_REQUIREMENTS = ["pytest>=7", "hypothesis>=6"]


def execute(cmd):
    process = subprocess.run(cmd,
                             capture_output=True,
                             universal_newlines=True)

    if process.stdout:
        print(process.stdout)

    if process.returncode != 0:
        print("Something went wrong. Consult the notes above.")
        print(process.stderr)

    process.check_returncode()


def install_requirements():
    execute([sys.executable, "-m", "pip", "install", *REQUIREMENTS, *TEST_REQUIREMENTS])


def package():
    from setuptools import setup

    setup(
        name="cavity-transport",
        version=__version__,
        description="Cavity-assisted charge transport through a two-band chain",
        packages=["cavity_transport"],
        py_modules=["app", "config"],
        python_requires=">=3.8",
        install_requires=REQUIREMENTS,
        extras_require={"test": TEST_REQUIREMENTS},
        entry_points={"console_scripts": ["cavity-transport=app:main"]},
    )


if __name__ == '__main__':
    if len(sys.argv) == 1:
        install_requirements()
    else:
        package()
