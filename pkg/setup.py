from setuptools import find_packages, setup

PACKAGE_NAME = "perfedavg_simulator"
REQUIRED_MODULES = ["setuptools", "numpy", "scipy", "pyyaml"]

setup(
    name=PACKAGE_NAME,
    version="0.0.0",
    packages=find_packages(exclude=["tests"]),
    install_requires=REQUIRED_MODULES,
    zip_safe=True,
    description="Personalized federated meta-learning simulator with bound diagnostics",
    license="MIT",
    tests_require=["pytest"],
    entry_points={
        "console_scripts": [
            "perfedavg = " + "perfedavg_simulator.cli.main:main",
        ],
    },
)
