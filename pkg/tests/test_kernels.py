"""Backend selection and compiled-vs-python kernel agreement."""

import os
import subprocess
import sys

import numpy as np
import pytest

from hjbpass import _kernels_py
from hjbpass.kernels import backend_name, get_kernels, max_compiled_degree

try:
    from hjbpass import _kernels as _compiled
except ImportError:
    _compiled = None

needs_compiled = pytest.mark.skipif(_compiled is None, reason="compiled backend not built")

DOMAIN = (-2.0, 2.0, -1.5, 2.5)


def random_alpha(seed: int, degree: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    alpha = rng.standard_normal((degree, degree))
    alpha[0, 0] = 0.0
    return np.ascontiguousarray(alpha)


def test_backend_name_is_known():
    assert backend_name() in ("compiled", "python")


def test_get_kernels_dispatch():
    limit = max_compiled_degree()
    if _compiled is None:
        assert limit is None
        assert get_kernels(3) is _kernels_py
    else:
        assert limit >= 1
        assert get_kernels(limit) is _compiled
        assert get_kernels(limit + 1) is _kernels_py


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, HJBPASS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from hjbpass.kernels import backend_name; print(backend_name())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


@needs_compiled
class TestBackendAgreement:
    def test_eval_point(self):
        for seed in range(10):
            degree = 3 + seed
            alpha = random_alpha(seed, degree)
            rng = np.random.default_rng(1000 + seed)
            for z in rng.uniform(-2.5, 2.5, size=(20, 2)):
                a = _compiled.eval_point(alpha, 0.5, *DOMAIN, z[0], z[1])
                b = _kernels_py.eval_point(alpha, 0.5, *DOMAIN, z[0], z[1])
                np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)

    def test_value_diff(self):
        for seed in range(10):
            degree = 3 + seed
            alpha = random_alpha(seed, degree)
            rng = np.random.default_rng(2000 + seed)
            for sep in (1.0, 1e-6, 1e-12):
                z1 = rng.uniform(-2.0, 2.0, size=2)
                z2 = z1 + sep * rng.standard_normal(2)
                a = _compiled.value_diff(alpha, *DOMAIN, z1[0], z1[1], z2[0], z2[1])
                b = _kernels_py.value_diff(alpha, *DOMAIN, z1[0], z1[1], z2[0], z2[1])
                assert abs(a - b) <= 1e-12 * abs(b) + 1e-18

    def test_eta_inverse(self):
        for seed in range(10):
            degree = 4 + (seed % 5)
            alpha = random_alpha(seed, degree)
            rng = np.random.default_rng(3000 + seed)
            z_hint = rng.uniform(-0.5, 0.5, size=2)
            v = rng.uniform(-0.5, 0.5, size=2)
            a = _compiled.eta_inverse(alpha, *DOMAIN, v[0], v[1], z_hint[0], z_hint[1], 10, 1e-14)
            b = _kernels_py.eta_inverse(alpha, *DOMAIN, v[0], v[1], z_hint[0], z_hint[1], 10, 1e-14)
            # Same iteration from the same start: identical flags, matching iterates.
            assert a[4] == b[4]
            if not a[4]:
                np.testing.assert_allclose(a[:2], b[:2], rtol=1e-10, atol=1e-10)
