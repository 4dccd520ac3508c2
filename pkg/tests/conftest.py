import math

import pytest

from spraytube.core import FractalSpray, FractalString, SelfSimilarSystem
from spraytube.generators import builtin

# name -> (ratios, ambient dimension, builtin generator)
TILINGS = {
    "cantor_carpet": ((1 / 3,) * 4, 2, "cantor_carpet_gen"),
    "sierpinski_gasket": ((1 / 2,) * 3, 2, "sierpinski_gasket_gen"),
    "sierpinski_carpet": ((1 / 3,) * 8, 2, "sierpinski_carpet_gen"),
    "cantor_string": ((1 / 3,) * 2, 1, "interval"),
}
ACCEPTANCE_LINES: list = []
MONOPHASE = ("sierpinski_gasket", "sierpinski_carpet", "cantor_string")


def make_spray(name: str, size: float = 1.0) -> FractalSpray:
    ratios, d, gen = TILINGS[name]
    rep = builtin(gen, size / 3 if name == "cantor_string" else size)
    sysm = SelfSimilarSystem(ratios, d)
    return FractalSpray(FractalString.self_similar(sysm), (rep,), sysm)


def log_grid(g: float, lo: float, hi: float, n: int, endpoint: bool = False):
    """``n`` log-spaced points in ``[lo*g, hi*g)``."""
    step = (math.log(hi) - math.log(lo)) / (n - 1 if endpoint else n)
    return [g * math.exp(math.log(lo) + i * step) for i in range(n)]


@pytest.fixture(params=sorted(TILINGS))
def tiling(request):
    return request.param, make_spray(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
