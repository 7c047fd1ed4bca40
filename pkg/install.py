"""
Installation script for the restriction laboratory.

Installs the Python dependencies (numpy, scipy, sympy, tqdm, pytest) and
runs the reduced-scale self test.
"""
import os
import subprocess
import sys

MIN_VERSION = (3, 9)


def print_header(text):
    print("\n" + "=" * 60)
    print(f" {text}")
    print("=" * 60)


def print_step(text):
    print(f"\n>> {text}")


def check_python_version(version=None):
    print_step("Checking Python version")
    major, minor = (version or sys.version_info)[:2]
    if (major, minor) < MIN_VERSION:
        print(f"Incompatible Python version: {major}.{minor}")
        print("The restriction laboratory requires Python {}.{} or higher.".format(*MIN_VERSION))
        return False
    print(f"Python version: {major}.{minor} (OK)")
    return True


def install_dependencies():
    print_step("Installing dependencies")
    requirements = os.path.join(os.path.dirname(os.path.abspath(__file__)), "requirements.txt")
    result = subprocess.run(
        [sys.executable, "-m", "pip", "install", "--upgrade", "-r", requirements]
    )
    if result.returncode == 0:
        print("Dependencies installed successfully.")
        return True
    print("Error installing dependencies. Try manually: pip install -r requirements.txt")
    return False


def run_selftest():
    print_step("Running the self test")
    here = os.path.dirname(os.path.abspath(__file__))
    result = subprocess.run(
        [sys.executable, os.path.join(here, "main.py"), "selftest", "--seed", "0", "--quiet",
         "--output", os.path.join(here, "selftest.json")]
    )
    if result.returncode == 0:
        print("Self test passed.")
        return True
    print(f"Self test failed with exit code {result.returncode}; see selftest.json")
    return False


def main():
    print_header("Restriction Lab Installation")

    if not check_python_version():
        return

    if not install_dependencies():
        return

    run_selftest()

    print_header("Installation Complete")
    print("To run an experiment: python main.py <command> --help")


if __name__ == "__main__":
    main()
