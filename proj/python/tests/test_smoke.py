import math

import numpy as np
import pytest

import emi


def test_half_space_low_induction():
    dev = emi.Device([1.48], [0.01], [1e3], [emi.Orientation.vertical])
    b = emi.forward(emi.Model.uniform(1, 1.0, [0.01]), dev)
    omega = 2 * math.pi * 1e3
    sa = 4 * b[0].imag / (4e-7 * math.pi * omega * 1.48**2)
    assert sa == pytest.approx(0.01, rel=0.02)


def test_jacobian_shape_and_sign():
    dev = emi.cmd_explorer()
    m = emi.Model.uniform(5, 3.5, [0.2, 0.5, 1.0, 0.5, 0.2])
    j = emi.jacobian(m, dev)
    assert j.shape == (len(dev), 5)
    # J is the derivative of b - M, and quadrature grows with sigma
    assert np.all(j.imag[:, 0] < 0)


def test_noise_is_seeded():
    b = emi.forward(emi.discretize(emi.profile_gaussian), emi.cmd_explorer())
    assert np.array_equal(emi.add_noise(b, 1e-3, 7), emi.add_noise(b, 1e-3, 7))
    assert emi.nominal_snr_db(1e-3) == pytest.approx(60.0)


def test_invert_and_doi():
    dev = emi.cmd_explorer()
    b = emi.add_noise(emi.forward(emi.discretize(emi.profile_gaussian, 30), dev), 1e-3, 1)
    r = emi.invert(dev, b, reg="d2", param="disc", delta=1e-3 * math.sqrt(2), layers=30)
    assert r["converged"]
    assert len(r["sigma"]) == 30
    assert abs(r["depths"][int(np.argmax(r["sigma"]))] - 1.2) < 0.5
    z = emi.doi(r["sensitivity"], r["depths"])
    assert z is None or 0 < z < 3.5


def test_errors():
    with pytest.raises(ValueError):
        emi.Model([0.0, 1.0], [0.1])
    with pytest.raises(ValueError):
        emi.invert(emi.cmd_explorer(), np.zeros(12, complex), reg="l3")
