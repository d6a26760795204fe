"""The randomized battery itself: every check passes on the toy lattice and
the battery is deterministic for a fixed seed."""

from bdfvac.invariants import run_battery


def test_full_battery_passes_on_toy_lattice(lat4):
    results = run_battery(lat4, seed=99)
    failed = [(name, detail) for name, ok, detail in results if not ok]
    assert not failed, failed


def test_battery_deterministic(lat4):
    a = run_battery(lat4, seed=5)
    b = run_battery(lat4, seed=5)
    assert a == b
