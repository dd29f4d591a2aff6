import numpy as np
import pytest


def dft_amplitude(x, freq_hz, rate):
    """Single-bin direct DFT amplitude (independent of numpy.fft)."""
    n = np.arange(len(x))
    return 2.0 * abs(np.sum(x * np.exp(-2j * np.pi * freq_hz * n / rate))) / len(x)


def sine(freq_hz, rate, seconds=1.0, amp=1.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return amp * np.sin(2 * np.pi * freq_hz * t)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
