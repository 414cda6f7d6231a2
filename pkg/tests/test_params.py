import json, math, os, sys, platform, re, unittest
import numpy as np
import pandas as pd
from termcolor import colored
import unittest.mock as mock

expected_properties = [
    "debug", "out_dir", "output", "package_version", "platform", "workers"
]

expected_package_version_pattern = r'^(\d+\.\d+\.\d+)$'
expected_platform_pattern = r'^(Windows|Linux|Darwin) (\w+) \(([^)]+)\), Python (\d+\.\d+\.\d+)$'
expected_sha256_pattern = r'^[0-9a-f]{64}$'

fixtures_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')
tiny_rpw_fixture = os.path.join(fixtures_dir, 'tiny_rpw.exlb')

# long runs are opt-in
full_acceptance = os.environ.get('EXLAB_FULL') == '1'
full_rpw_scaling = os.environ.get('EXLAB_FULL_RPW') == '1'

test_seed = 20240611

#
# model catalogue ids
#
bf_id = "bargmann-fock"
rpw_id = "rpw"
powerlaw_id = "powerlaw:alpha=1.0,r0=0.5"
atom_id = "atom:mass=0.25,base=bargmann-fock"

# closed forms
bf_g_01 = 2 * math.pi * math.exp(-0.08 * math.pi ** 2)
bf_rkhs_01 = 1 / (0.2 * math.sqrt(bf_g_01))
bf_tv_001 = 0.01 * bf_rkhs_01 / math.sqrt(math.log(2))

#
# hand-made window arrays; the outermost ring is the window boundary
#
block5 = np.zeros((5, 5))
block5[1:3, 1:3] = 1.0

diag3 = np.array([[1.0, 0.0, 1.0],
                  [0.0, 1.0, 0.0],
                  [1.0, 0.0, 1.0]])

single_peak = np.array([[1.0, 2.0, 1.0],
                        [2.0, 5.0, 2.0],
                        [1.0, 2.0, 1.0]])

two_peaks = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                      [0.0, 1.0, 2.0, 1.0, 2.0, 1.0, 0.0],
                      [0.0, 2.0, 5.0, 3.0, 6.0, 2.0, 0.0],
                      [0.0, 1.0, 2.0, 1.0, 2.0, 1.0, 0.0],
                      [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]])

_rows, _cols = np.indices((6, 6))
monotone_plane = (_rows + 2 * _cols).astype(float)

centre_bump = np.zeros((7, 7))
centre_bump[3, 3] = 5.0

# x*y on an even grid, so no vertex sits on the axes
_xy = (np.arange(8) - 3.5) * 0.1
saddle_xy = np.outer(_xy, _xy)


def random_grids(n, seed, max_side=24):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        ny, nx = rng.integers(3, max_side + 1, size=2)
        yield rng.standard_normal((ny, nx))


def print_test_result(test_name, condition=True, is_ipython=False, is_async=False, is_slow=False):
    status_header = colored("[PASSED] ", 'green') if condition else colored("[FAILED] ", 'red')
    headers = [status_header]

    if is_ipython:
        headers.append(colored("[MAGIC EXT]", 'blue'))
    if is_async:
        headers.append(colored("[ASYNC]", 'magenta'))
    if is_slow:
        headers.append(colored("[FULL]", 'yellow'))

    headers.append(test_name)
    message = " ".join(headers)

    print("\n" + message)
