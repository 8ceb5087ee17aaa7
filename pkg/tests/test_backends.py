"""Compiled and pure-python kernels must agree and be selectable."""

import os
import subprocess
import sys

import numpy as np
import pytest

from trafficfill import (
    TrainConfig,
    available_backends,
    split,
    train,
)
from trafficfill import _backend, _kernels_py

from helpers import random_model, random_tensor

BACKENDS = available_backends()
needs_compiled = pytest.mark.skipif(
    "compiled" not in BACKENDS, reason="compiled extension not built"
)

KINDS = (
    (_kernels_py.KIND_HYBRID, 1.0),
    (_kernels_py.KIND_L2, 1.0),
    (_kernels_py.KIND_CAUCHY, 1.0),
    (_kernels_py.KIND_CAUCHY, 0.3),
)


def instance(seed, dims=(12, 10, 8), rank=4, n=200):
    rng = np.random.default_rng(seed)
    m = random_model(rng, dims, rank)
    t = random_tensor(rng, dims, n, high=4.0)
    return m, t


def test_python_backend_always_importable():
    assert _kernels_py.BACKEND == "python"
    assert "python" in BACKENDS


@needs_compiled
def test_predict_agreement():
    m, t = instance(81)
    args = (*m.factors, t.ii, t.jj, t.kk)
    a = BACKENDS["compiled"].predict_entries(*args)
    b = BACKENDS["python"].predict_entries(*args)
    np.testing.assert_allclose(a, b, rtol=1e-10)


@needs_compiled
@pytest.mark.parametrize("kind, gamma", KINDS)
@pytest.mark.parametrize("lam", [0.0, 2.0 ** -10])
def test_objective_agreement(kind, gamma, lam):
    m, t = instance(82)
    args = (*m.factors, t.ii, t.jj, t.kk, t.values, lam, kind, gamma)
    a = BACKENDS["compiled"].objective_sum(*args)
    b = BACKENDS["python"].objective_sum(*args)
    assert a == pytest.approx(b, rel=1e-10)


@needs_compiled
@pytest.mark.parametrize("kind, gamma", KINDS)
@pytest.mark.parametrize("mode", [0, 1, 2])
def test_update_agreement(kind, gamma, mode):
    m, t = instance(83)
    ma, mb = m.copy(), m.copy()
    for mats, impl in ((ma, BACKENDS["compiled"]), (mb, BACKENDS["python"])):
        impl.update_pass(
            *mats.factors,
            t.ii,
            t.jj,
            t.kk,
            t.values,
            mode,
            2.0 ** -10,
            1e-12,
            kind,
            gamma,
        )
    np.testing.assert_allclose(ma.factors[mode], mb.factors[mode], rtol=1e-10)


@needs_compiled
def test_full_training_run_agreement(monkeypatch):
    rng = np.random.default_rng(84)
    t = random_tensor(rng, (10, 9, 8), 250)
    parts = split(t, (70, 20, 10), seed=2)
    cfg = TrainConfig(rank=3, lam=2.0 ** -10, max_iters=30, tol=1e-12)

    results = {}
    for name, impl in BACKENDS.items():
        monkeypatch.setattr(_backend, "predict_entries", impl.predict_entries)
        monkeypatch.setattr(_backend, "objective_sum", impl.objective_sum)
        monkeypatch.setattr(_backend, "update_pass", impl.update_pass)
        results[name] = train(t, parts, cfg)
    monkeypatch.undo()

    (m_c, r_c), (m_p, r_p) = results["compiled"], results["python"]
    for fc, fp in zip(m_c.factors, m_p.factors):
        np.testing.assert_allclose(fc, fp, rtol=1e-9)
    assert len(r_c.history) == len(r_p.history)
    for rec_c, rec_p in zip(r_c.history, r_p.history):
        assert rec_c.train_objective == pytest.approx(
            rec_p.train_objective, rel=1e-9
        )


def _backend_in_subprocess(value):
    env = dict(os.environ)
    if value is None:
        env.pop("TRAFFICFILL_KERNELS", None)
    else:
        env["TRAFFICFILL_KERNELS"] = value
    return subprocess.run(
        [sys.executable, "-c",
         "import trafficfill; print(trafficfill.active_backend())"],
        capture_output=True,
        text=True,
        env=env,
    )


def test_env_var_forces_python_backend():
    proc = _backend_in_subprocess("python")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "python"


@needs_compiled
def test_env_var_forces_compiled_backend():
    proc = _backend_in_subprocess("compiled")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "compiled"


def test_env_var_rejects_unknown_backend():
    proc = _backend_in_subprocess("fortran")
    assert proc.returncode != 0
    assert "TRAFFICFILL_KERNELS" in proc.stderr


def test_active_backend_reports_current_module():
    assert _backend.active_backend() == _backend.BACKEND
    assert _backend.BACKEND in ("compiled", "python")
