"""
Setup Script for the Spherical Factor Model Toolkit
===================================================

Checks that the packages listed in requirements.txt import, that the source
tree is complete, and that the output directory exists.
"""

import importlib.util
import os
import re
import sys

ROOT = os.path.dirname(os.path.abspath(__file__))

# distribution name -> import name, where they differ
IMPORT_NAMES = {'scikit-learn': 'sklearn'}

MODULES = ('errors', 'geometry', 'distributions', 'model', 'gradients', 'sampler',
           'postprocess', 'diagnostics', 'data_manager', 'cli')


def read_requirements(path=os.path.join(ROOT, 'requirements.txt')):
    """Distribution names from a requirements file, version pins stripped"""
    names = []
    with open(path) as fh:
        for line in fh:
            line = line.split('#', 1)[0].strip()
            if line:
                names.append(re.split(r'[<>=!~\[; ]', line, maxsplit=1)[0])
    return names


def missing_packages(names):
    return [name for name in names
            if importlib.util.find_spec(IMPORT_NAMES.get(name, name)) is None]


def missing_files(root=ROOT):
    expected = ['main.py', 'requirements.txt', 'src/config.py', 'src/spherical_system.py',
                'src/modules/__init__.py'] + [f'src/modules/{name}.py' for name in MODULES]
    return [path for path in expected if not os.path.exists(os.path.join(root, path))]


def main():
    print("=" * 60)
    print("SPHERICAL FACTOR MODEL TOOLKIT - SETUP")
    print("=" * 60)

    packages = read_requirements()
    absent = missing_packages(packages)
    print(f"\n📦 {len(packages) - len(absent)}/{len(packages)} required packages available")
    for name in absent:
        print(f"   ✗ {name} - NOT INSTALLED")

    files = missing_files()
    print(f"📁 Source tree {'complete' if not files else 'incomplete'}")
    for path in files:
        print(f"   ✗ {path} - MISSING")

    output_dir = os.environ.get('SPHERICAL_FACTOR_OUTPUT_DIR', 'output')
    os.makedirs(output_dir, exist_ok=True)
    print(f"✓ Output directory: {output_dir}/")

    if absent or files:
        print("\n⚠ Fix the issues above; missing packages install with: pip install -r requirements.txt")
        return 1
    print("\n✅ Ready. Try: python main.py simulate --scenario sphere2 --seed 1")
    return 0


if __name__ == "__main__":
    sys.exit(main())
