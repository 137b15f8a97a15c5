"""Tests for the finite-difference checker itself: it must accept correct
gradients (including near kinks, via step refinement) and reject wrong ones
at every step size."""
import numpy as np
import pytest

import ckstn.tensor as T
from ckstn.errors import NumericError
from ckstn.gradcheck import grad_check
from ckstn.gradsuite import DEFAULT_SEEDS, run_suite
from ckstn.model import toy_config
from ckstn.tensor import Tensor, _make


def test_accepts_correct_gradient():
    rng = np.random.default_rng(60)
    a = Tensor(rng.standard_normal((3, 3)), requires_grad=True)

    def f():
        return T.sum_all(T.mul(a, a))

    reports = grad_check(f, [("a", a)], tol=1e-6)
    assert reports[0].passed
    assert reports[0].checked_coords == 9


def test_rejects_wrong_backward_at_every_step():
    # op computes x^2 but claims gradient 3x; refinement must not rescue it
    a = Tensor(np.array([[1.5, -0.7], [0.3, 2.0]]), requires_grad=True)

    def broken_square(x):
        def back(g):
            x._accumulate(g * 3.0 * x.data)  # wrong: true gradient is 2x
        return _make(x.data ** 2, (x,), back)

    def f():
        return T.sum_all(broken_square(a))

    reports = grad_check(f, [("a", a)], tol=1e-4)
    assert not reports[0].passed
    assert reports[0].max_rel_err > 0.1


def test_kink_inside_probe_interval_is_refined_away():
    # hinge corner sits 1e-4 from the base point, inside the nominal 1e-3
    # step but outside the refined ones; the analytic gradient is correct
    theta = 0.5
    a = Tensor(np.array([[theta]]), requires_grad=True)
    corner = theta + 1e-4

    def f():
        return T.sum_all(T.relu(T.add_const(a, -corner)))

    reports = grad_check(f, [("a", a)], tol=1e-4)
    assert reports[0].passed  # analytic 0 == refined numeric 0


def test_max_coords_limits_probes():
    rng = np.random.default_rng(61)
    a = Tensor(rng.standard_normal((10, 10)), requires_grad=True)

    def f():
        return T.sum_all(T.mul(a, a))

    reports = grad_check(f, [("a", a)], tol=1e-6, max_coords=7, coord_seed=3)
    assert reports[0].checked_coords == 7
    # seeded coordinate choice is reproducible
    again = grad_check(f, [("a", a)], tol=1e-6, max_coords=7, coord_seed=3)
    assert reports[0].max_rel_err == again[0].max_rel_err


def test_nonfinite_loss_raises():
    a = Tensor(np.array([[0.0]]), requires_grad=True)

    def f():
        return Tensor(np.array([[np.inf]]))

    with pytest.raises(NumericError):
        grad_check(f, [("a", a)], tol=1e-4)


# -- the full-model suite -----------------------------------------------------------

def test_suite_single_cell_passes_quickly():
    result = run_suite(toy_config(), seeds=(11,), tol=1e-4, max_coords=2,
                       pairs=2, both_normalizers=False)
    assert result.passed
    assert len(result.cells) == 1
    cell = result.cells[0]
    assert cell.attention_normalizer == "literal-eq1"
    assert cell.max_rel_err < 1e-4
    assert result.failures() == []
    d = result.as_dict()
    assert d["pass"] is True and len(d["cells"]) == 1


def test_suite_covers_both_normalizers():
    result = run_suite(toy_config(), seeds=(11,), tol=1e-4, max_coords=1,
                       pairs=2, both_normalizers=True)
    norms = {c.attention_normalizer for c in result.cells}
    assert norms == {"literal-eq1", "softmax"}


def test_suite_default_seed_count():
    assert len(DEFAULT_SEEDS) >= 5
