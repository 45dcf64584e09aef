from setuptools import setup, find_packages

with open("requirements.txt") as f:
    requirements = [line for line in f.read().splitlines() if line.strip()]

setup(
    name="lawline",
    version="0.2.0",
    description="lawline: fit, compare and forecast loss-to-loss scaling laws",
    packages=find_packages(include=["src", "src.*"]),
    install_requires=requirements,
    extras_require={"dev": ["pytest>=7.4"]},
    python_requires=">=3.10",
    entry_points={
        "console_scripts": [
            "lawline=src.main:main",
        ],
    },
    package_data={
        "": ["*.json", "*.yaml", "*.yml"],
    },
    include_package_data=True,
)
