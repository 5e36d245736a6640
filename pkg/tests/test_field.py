import numpy as np
import pytest

from holoretrieve.field import (
    ComplexField,
    OpticsConfig,
    RealImage,
    ShapeError,
    check_same_grid,
    energy,
    from_amp_phase,
    intensity,
)


def test_complex_field_is_read_only_copy():
    src = np.ones((4, 4), complex)
    f = ComplexField(src, 1e-6)
    src[0, 0] = 5
    assert f.data[0, 0] == 1
    with pytest.raises(ValueError):
        f.data[0, 0] = 2
    assert f.data.dtype == np.complex128 and f.shape == (4, 4)


@pytest.mark.parametrize("shape", [(1, 4), (4, 1), (4,), (2, 2, 2)])
def test_bad_shapes(shape):
    with pytest.raises(ShapeError):
        ComplexField(np.ones(shape), 1e-6)


def test_rejects_nonfinite_and_bad_pixel():
    with pytest.raises(ValueError):
        ComplexField(np.full((3, 3), np.nan), 1e-6)
    with pytest.raises(ValueError):
        RealImage(np.ones((3, 3)), 0.0)


def test_nonnegative_tag():
    with pytest.raises(ValueError):
        RealImage(-np.ones((3, 3)), 1e-6, nonnegative=True)
    assert RealImage(-np.ones((3, 3)), 1e-6).data.min() == -1


def test_amp_phase_round_trip(rng):
    amp = RealImage(rng.random((8, 6)) + 0.1, 2e-6)
    ph = RealImage(rng.uniform(-3, 3, (8, 6)), 2e-6)
    f = from_amp_phase(amp, ph)
    np.testing.assert_allclose(f.amplitude().data, amp.data, rtol=1e-14)
    np.testing.assert_allclose(f.phase().data, ph.data, atol=1e-14)
    assert f.width == 6 and f.height == 8


def test_intensity_and_energy(rng):
    d = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    f = ComplexField(d, 1e-6)
    np.testing.assert_allclose(intensity(f).data, np.abs(d) ** 2, rtol=1e-14)
    assert energy(f) == pytest.approx(np.sum(np.abs(d) ** 2), rel=1e-14)


def test_check_same_grid():
    a = RealImage(np.ones((4, 4)), 1e-6)
    check_same_grid(a, RealImage(np.zeros((4, 4)), 1e-6))
    with pytest.raises(ShapeError):
        check_same_grid(a, RealImage(np.ones((4, 5)), 1e-6))
    with pytest.raises(ShapeError):
        check_same_grid(a, RealImage(np.ones((4, 4)), 2e-6))


def test_optics_config_validation():
    cfg = OpticsConfig(1e-10, 0.1, 1e-6)
    assert cfg.wavenumber == pytest.approx(2 * np.pi / 1e-10)
    assert cfg.at_distance(-0.1).distance == -0.1
    with pytest.raises(ValueError):
        OpticsConfig(0, 0.1, 1e-6)
    with pytest.raises(ValueError):
        OpticsConfig(1e-10, float("inf"), 1e-6)
