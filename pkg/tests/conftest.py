"""Shared fixtures and independent oracles for the test suite.

The forward-kinematics oracle below composes each joint's transform from
elementary rotation/translation matrices, deliberately avoiding the closed
form used by the library, so the two implementations can check each other.
"""

from __future__ import annotations

import asyncio
import math
import threading

import numpy as np
import pytest

from rcmtwin import (
    DigitalTwin,
    RobotModel,
    ServiceConfig,
    TwinClient,
    TwinService,
    load_robot_model,
    load_workspace,
)

# ---------------------------------------------------------------------------
# independent kinematics oracle


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    out = np.eye(4)
    out[1, 1] = c
    out[1, 2] = -s
    out[2, 1] = s
    out[2, 2] = c
    return out


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    out = np.eye(4)
    out[0, 0] = c
    out[0, 1] = -s
    out[1, 0] = s
    out[1, 1] = c
    return out


def translate(x: float, y: float, z: float) -> np.ndarray:
    out = np.eye(4)
    out[:3, 3] = (x, y, z)
    return out


def oracle_fk(model: RobotModel, q) -> np.ndarray:
    """Flange transform built joint by joint from elementary matrices."""
    t = np.eye(4)
    for k in range(6):
        a, d, alpha, off = model.dh[k]
        t = t @ rot_z(q[k] + off) @ translate(0.0, 0.0, d) @ translate(a, 0.0, 0.0) @ rot_x(alpha)
    return t


def random_q(rng: np.random.Generator, model: RobotModel, margin: float = 0.2) -> np.ndarray:
    lo = model.joint_limits[:, 0] + margin
    hi = model.joint_limits[:, 1] - margin
    return rng.uniform(lo, hi)


# ---------------------------------------------------------------------------
# fixtures


@pytest.fixture(scope="session")
def model() -> RobotModel:
    return load_robot_model()


@pytest.fixture(scope="session")
def workspace():
    return load_workspace()


@pytest.fixture()
def twin(model, workspace) -> DigitalTwin:
    return DigitalTwin(model, workspace)


@pytest.fixture()
def make_twin(model, workspace):
    def factory(**kwargs) -> DigitalTwin:
        kwargs.setdefault("model", model)
        kwargs.setdefault("workspace", workspace)
        return DigitalTwin(**kwargs)

    return factory


# ---------------------------------------------------------------------------
# live service harness


class ServiceHarness:
    """Runs a TwinService on an ephemeral port in a dedicated event loop."""

    def __init__(self, twin: DigitalTwin | None = None, **config_kwargs):
        config_kwargs.setdefault("host", "127.0.0.1")
        config_kwargs.setdefault("port", 0)
        self.service = TwinService(twin=twin, config=ServiceConfig(**config_kwargs))
        self._loop = asyncio.new_event_loop()
        self._started = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        asyncio.set_event_loop(self._loop)
        self._loop.run_until_complete(self.service.start())
        self._started.set()
        self._loop.run_forever()
        self._loop.run_until_complete(self.service.stop())
        self._loop.close()

    def __enter__(self) -> "ServiceHarness":
        self._thread.start()
        if not self._started.wait(timeout=10.0):
            raise RuntimeError("service failed to start within 10 s")
        return self

    def __exit__(self, *exc) -> None:
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=10.0)

    @property
    def port(self) -> int:
        return self.service.tcp_port

    def connect(self, timeout: float = 5.0) -> TwinClient:
        return TwinClient("127.0.0.1", self.port, timeout=timeout)


@pytest.fixture()
def service_harness():
    def factory(twin: DigitalTwin | None = None, **config_kwargs) -> ServiceHarness:
        return ServiceHarness(twin=twin, **config_kwargs)

    return factory
