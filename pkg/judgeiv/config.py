# Copyright (C) 2024 The judgeiv authors
#
# You can copy, redistribute or modify this Program under the terms of
# the GNU General Public License version 2 as published by the Free
# Software Foundation.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# version 2 along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA
# 02110-1301, USA.

import os.path
import logging
from dataclasses import dataclass

import yaml

from judgeiv.dispatch import parse_estimators
from judgeiv.exceptions import InvalidConfigurationError
from judgeiv.report import parse_dims

logger = logging.getLogger()

DEFAULT_CONFIG_PATH = "judgeiv.yaml"

# Configuration keys.
SEED_KEY = "seed"
REPS_KEY = "reps"
WORKERS_KEY = "workers"
ESTIMATORS_KEY = "estimators"
DIMS_KEY = "dims"
MAX_SYSTEM_SIZE_KEY = "max-system-size"
DOF_KEY = "dof-correction"
SCENARIO_KEY = "scenario"

DEFAULT_CONFIG = {
    SEED_KEY: 1,
    WORKERS_KEY: 1,
    SCENARIO_KEY: "figure1",
    MAX_SYSTEM_SIZE_KEY: 40000,
    DOF_KEY: False,
}

_args = None
_config = {}

# The filename the config was read from, if any.
filename = None

def has(key):
    """Return true if a configuration key exists."""
    return key in _config

def set(key, value):
    """Set a configuration value."""
    _config[key] = value

def get(key):
    """Get a configuration value."""
    if key in _config:
        return _config[key]
    return None

def args():
    """Return the parsed argument object."""
    return _args

def get_arg(key):
    key = key.replace("-", "_")
    if hasattr(_args, key):
        val = getattr(_args, key)
        if val not in [[], None]:
            return val
    return None

def parse_config_text(text):
    """Parse a config file: a YAML mapping, or key=value lines with
    each value read as a YAML scalar."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError:
        doc = None
    if isinstance(doc, dict):
        return doc
    if doc is None and not text.strip():
        return {}
    config = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfigurationError(
                "Line %d: expected key=value, got: %s" % (lineno, line))
        key, value = [part.strip() for part in line.split("=", 1)]
        try:
            config[key] = yaml.safe_load(value) if value else None
        except yaml.YAMLError as err:
            raise InvalidConfigurationError(
                "Line %d: bad value for %s: %s" % (lineno, key, err))
    return config

def load(path):
    logger.info("Loading %s", path)
    try:
        with open(path) as fileobj:
            return parse_config_text(fileobj.read())
    except (IOError, OSError) as err:
        raise InvalidConfigurationError(
            "Failed to read configuration %s: %s" % (path, err))

def reset():
    global _args
    global filename
    _args = None
    filename = None
    _config.clear()

def init(args):
    global _args
    global filename

    _args = args
    _config.clear()
    _config.update(DEFAULT_CONFIG)

    path = getattr(args, "config", None)
    if path:
        _config.update(load(path))
        filename = path
    elif os.path.exists(DEFAULT_CONFIG_PATH):
        _config.update(load(DEFAULT_CONFIG_PATH))
        filename = DEFAULT_CONFIG_PATH

    # Apply command line arguments to the config.
    for arg in vars(args):
        if arg in ("func", "config", "version"):
            continue
        if getattr(args, arg) is not None:
            key = arg.replace("_", "-")
            val = getattr(args, arg)
            logger.debug("Setting configuration value %s -> %s", key, val)
            _config[key] = val


@dataclass(frozen=True)
class RunConfig:
    """The validated settings of one command run."""

    subcommand: str
    config_path: str = None
    data_path: str = None
    schema_path: str = None
    out_path: str = None
    estimators: tuple = ()
    dims: tuple = ()
    seed: int = 1
    reps: int = None
    workers: int = 1
    max_system_size: int = 40000
    dof_correction: bool = False
    fast: bool = False
    inject_fault: bool = False

    def __post_init__(self):
        if self.subcommand not in ("dgp", "simulate", "estimate", "check"):
            raise InvalidConfigurationError(
                "Unknown command: %s" % (self.subcommand))
        if self.subcommand == "estimate":
            for key, value in (("--data", self.data_path),
                               ("--schema", self.schema_path),
                               ("--dims", self.dims)):
                if not value:
                    raise InvalidConfigurationError(
                        "estimate requires %s" % (key))
        if self.subcommand in ("dgp", "simulate") and not self.out_path:
            raise InvalidConfigurationError(
                "%s requires --out" % (self.subcommand))
        if self.workers < 1:
            raise InvalidConfigurationError("workers must be at least 1")
        if self.max_system_size < 1:
            raise InvalidConfigurationError(
                "max-system-size must be at least 1")


def _int(key, value):
    if value is None:
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        raise InvalidConfigurationError(
            "Configuration value %s must be an integer: %r" % (key, value))


def run_config():
    """Build the RunConfig from the merged configuration."""
    estimators = get(ESTIMATORS_KEY)
    dims = get(DIMS_KEY)
    return RunConfig(
        subcommand=get("subcommand"),
        config_path=filename,
        data_path=get("data"),
        schema_path=get("schema"),
        out_path=get("out"),
        estimators=tuple(parse_estimators(estimators)) if estimators else (),
        dims=tuple(parse_dims(dims)) if dims else (),
        seed=_int(SEED_KEY, get(SEED_KEY)),
        reps=_int(REPS_KEY, get(REPS_KEY)),
        workers=_int(WORKERS_KEY, get(WORKERS_KEY)),
        max_system_size=_int(MAX_SYSTEM_SIZE_KEY, get(MAX_SYSTEM_SIZE_KEY)),
        dof_correction=bool(get(DOF_KEY)),
        fast=bool(get("fast")),
        inject_fault=bool(get("inject-fault")))
