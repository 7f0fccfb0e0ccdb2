import pytest

from arrivalnet.sim import build_windows, simulate_dataset


def central_diff(f, arr, index, h=1e-5):
    """Central finite difference of scalar ``f()`` w.r.t. ``arr[index]`` (perturbed in place)."""
    orig = arr[index]
    arr[index] = orig + h
    up = f()
    arr[index] = orig - h
    down = f()
    arr[index] = orig
    return (up - down) / (2 * h)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_grads(loss_fn, tensors, rng, n_checks, h=1e-5):
    """Compare autodiff against central differences at random entries; returns the max relative error."""
    from arrivalnet.tensor import backward

    for t in tensors:
        t.grad = None
    backward(loss_fn())
    worst = 0.0
    for _ in range(n_checks):
        t = tensors[rng.integers(len(tensors))]
        idx = tuple(int(rng.integers(s)) for s in t.shape)
        num = central_diff(lambda: float(loss_fn().data), t.data, idx, h)
        worst = max(worst, rel_err(float(t.grad[idx]), num))
    return worst


@pytest.fixture(scope="session")
def small_sim():
    return simulate_dataset(seed=11, n_routes=2, stops_per_route=20, n_days=1)


@pytest.fixture(scope="session")
def small_samples(small_sim):
    samples, _ = build_windows(small_sim.sequences, 10, 5)
    return samples


ACCEPTANCE = {}


def record_criterion(number, title, ok, detail, part=""):
    """Store one acceptance line for the end-of-run summary and fail the test if needed."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}{part} {title}: {detail}"
    ACCEPTANCE[(number, part)] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
