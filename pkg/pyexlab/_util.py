import hashlib, json, logging, os, platform

import numpy as np

# Conditional import for package metadata retrieval
try:
    from importlib.metadata import version, PackageNotFoundError
except ImportError:
    # This is for Python versions earlier than 3.8
    from importlib_metadata import version, PackageNotFoundError

logger = logging.getLogger("pyexlab")

UINT64_MASK = (1 << 64) - 1


def _get_package_version(package_name):
    try:
        pkg_version = version(package_name)
        if pkg_version is None:
            logger.warning("retrieved version for '%s' is None", package_name)
        return pkg_version
    except PackageNotFoundError:
        logger.warning("package '%s' not found, running from a source tree", package_name)
        return None


def _get_platform():
    system_val = platform.system()
    machine_val = platform.machine()
    platform_val = platform.platform()
    python_version_val = platform.python_version()
    return "%s %s (%s), Python %s" % (system_val, machine_val, platform_val, python_version_val), system_val


def _get_debug_log_file(debug_log_file=None):
    """Resolves the debug log path, creating its directory if needed."""
    if debug_log_file is None:
        debug_log_file = os.path.join(os.path.expanduser("~"), '.pyexlab', 'debug.log')
    log_dir = os.path.dirname(debug_log_file)
    if log_dir and not os.path.exists(log_dir):
        try:
            os.makedirs(log_dir, exist_ok=True)
        except OSError as e:
            raise ValueError(f"Unable to create the log directory {log_dir}: {str(e)}")
    return debug_log_file


def _attach_debug_handler(debug_log_file):
    """Sends DEBUG records of every ``pyexlab`` logger to ``debug_log_file``."""
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler) and handler.baseFilename == os.path.abspath(debug_log_file):
            return handler
    handler = logging.FileHandler(debug_log_file)
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    handler.setLevel(logging.DEBUG)
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG)
    return handler


def seed_split(master, index):
    """Derives the seed of replicate ``index`` from a master seed.

    The mixing function is numpy's ``SeedSequence`` hash of the master seed
    with ``spawn_key=(index,)``; the first 64-bit word of its generated state
    is the child seed. The result depends only on ``(master, index)``.

    :param master: Master seed (64-bit unsigned).
    :type master: int
    :param index: Replicate index (nonnegative).
    :type index: int
    :return: Child seed (64-bit unsigned).
    :rtype: int
    """
    if index < 0:
        raise ValueError(f"Invalid index. Expected a nonnegative integer, got {index}.")
    seq = np.random.SeedSequence(int(master) & UINT64_MASK, spawn_key=(int(index),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _canonical_json(obj):
    """Serialises ``obj`` with sorted keys and shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
