import json
from pathlib import Path

import numpy as np
import pytest

from interfere_opt.exact import ExactDesign
from interfere_opt.model import CovarianceSpec, build_kernel

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixture_path():
    return FIXTURES


def load_design(name):
    return ExactDesign.from_dict(json.loads((FIXTURES / f"{name}.json").read_text()))


def random_spd(rng, k, persymmetric=False):
    a = rng.normal(size=(k, k))
    s = a @ a.T / k
    if persymmetric:
        f = np.eye(k)[::-1]
        s = s + f @ s @ f
    return s + 0.5 * np.eye(k)


def custom_kernel(s):
    return build_kernel(CovarianceSpec("custom", rows=tuple(map(tuple, s))), s.shape[0])


# acceptance bookkeeping: one line per criterion in the terminal summary
ACCEPTANCE = {}


def record(criterion, ok, detail):
    prev = ACCEPTANCE.get(criterion)
    if prev is None:
        ACCEPTANCE[criterion] = [bool(ok), [detail]]
    else:
        prev[0] = prev[0] and bool(ok)
        prev[1].append(detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, details = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  " + "; ".join(details))
