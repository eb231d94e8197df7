from setuptools import setup, find_packages

setup(
    name="privacy-harness",
    version="0.1.0",
    description="Attacker-mismatch evaluation harness for speaker anonymisation",
    author="Ivan Garza Bermea",
    author_email="ivangb6@gmail.com",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["config", "harness", "main"],
    install_requires=[
        "numpy",
        "scipy",
        "scikit-learn",
        "pandas>=1.5",
        "matplotlib",
        "python-dotenv",
        "coverage"
    ],
    python_requires=">=3.9",
    entry_points={
        'console_scripts': [
            'privacy-harness=main:main',
        ],
    },
)
