import sys
import os.path
import subprocess
from setuptools import setup

from judgeiv.version import version


if sys.version_info < (3, 7):
    print("judgeiv requires Python 3.7 or newer.")
    sys.exit(0)

def write_git_revision():
    if not os.path.exists(".git"):
        return
    try:
        revision = subprocess.check_output(
            ["git", "rev-parse", "--short", "HEAD"])
        with open("./judgeiv/revision.py", "w") as fileobj:
            fileobj.write("revision = '%s'" % (revision.decode().strip()))
    except Exception as err:
        print("Failed to get current git revision: %s" % (err))

write_git_revision()

args = {
    "name": "judgeiv",
    "version": version,
    "description": "Jackknife IV estimators for judge designs with "
                   "multiway clustering",
    "author": "The judgeiv authors",
    "packages": [
        "judgeiv",
        "judgeiv.commands",
        "judgeiv.configs",
    ],
    "package_data": {"judgeiv.configs": ["*.yaml"]},
    "license": "GPLv2",
    "classifiers": [
        'License :: OSI Approved :: GNU General Public License v2 (GPLv2)',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    "python_requires": ">=3.7",
    "install_requires": [
        "numpy>=1.17",
        "scipy>=1.4",
        "pandas>=1.0",
        "pyyaml>=5.1",
    ],
    "scripts": [
        "bin/judgeiv",
    ],
}

setup(**args)
