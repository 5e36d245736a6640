import math

import numpy as np
import pytest

from holoretrieve.classical import (
    IterativeConfig,
    PaganinConfig,
    _div,
    _grad,
    alternating_projection_retrieve,
    detector_projection,
    object_projection,
    paganin_filter,
    paganin_reconstruct,
    total_variation,
    tv_denoise_l1,
    tv_l1_objective,
    wavelength_from_kev,
)
from holoretrieve.field import ComplexField, OpticsConfig, RealImage, ShapeError
from holoretrieve.optics import forward_intensity
from holoretrieve.synth import MaterialSpec, SceneParams, render_thickness, sample_scene, transmissivity


def test_aps_preset():
    cfg = PaganinConfig.aps()
    assert cfg.distance == 5e-3 and cfg.delta_over_beta == 1e3
    assert cfg.wavelength == pytest.approx(4.8243e-11, rel=1e-4)
    assert wavelength_from_kev(12.398) == pytest.approx(1.0000e-10, rel=1e-4)
    assert cfg.mu == pytest.approx(2 * cfg.wavenumber * cfg.beta)


def test_paganin_filter_dc_and_decay():
    cfg = PaganinConfig(0.1, 1e-10)
    h = paganin_filter(cfg, 16, 16, 1e-6)
    assert h[0, 0] == 1.0 and np.all(h <= 1) and h[0, 8] < h[0, 1]


def test_paganin_flat_input_gives_zero_thickness():
    flat = RealImage(np.full((32, 32), 0.8), 1e-6)
    res = paganin_reconstruct(flat, flat, PaganinConfig.aps())
    assert np.abs(res.thickness.data).max() <= 1e-12 and res.n_clamped == 0


def test_paganin_homogeneous_slab_exact():
    # a uniform slab has only a DC component, where the filter is exactly 1
    cfg = PaganinConfig(0.1, 1e-10, delta=1e-3)
    t0 = 3e-8
    image = RealImage(np.full((16, 16), math.exp(-cfg.mu * t0)), 1e-6)
    res = paganin_reconstruct(image, RealImage(np.ones((16, 16)), 1e-6), cfg)
    np.testing.assert_allclose(res.thickness.data, t0, rtol=1e-10)
    np.testing.assert_allclose(res.phase.data, -cfg.wavenumber * cfg.delta * t0, rtol=1e-10)


def test_paganin_forward_model_small():
    px = 1.6e-6
    cfg = PaganinConfig.aps()
    optics = OpticsConfig(cfg.wavelength, cfg.distance, px)
    material = MaterialSpec(cfg.delta, cfg.beta)
    scene = sample_scene(0, SceneParams(frame=64, pixel_size=px, n_max=5))
    t = render_thickness(scene)
    image = forward_intensity(transmissivity(t, material, cfg.wavelength), optics)
    res = paganin_reconstruct(image, RealImage(np.ones((64, 64)), px), cfg)
    support = t.data > 0
    rmse = np.sqrt(np.mean((res.thickness.data - t.data)[support] ** 2))
    assert rmse <= 0.1 * 1e-8


def test_paganin_rejects_bad_inputs():
    img = RealImage(np.ones((8, 8)), 1e-6)
    with pytest.raises(ValueError):
        paganin_reconstruct(img, RealImage(np.zeros((8, 8)), 1e-6), PaganinConfig.aps())
    with pytest.raises(ShapeError):
        paganin_reconstruct(img, RealImage(np.ones((8, 9)), 1e-6), PaganinConfig.aps())
    with pytest.raises(ValueError):
        PaganinConfig(0.0, 1e-10)


def test_div_is_negative_adjoint(rng):
    u = rng.standard_normal((7, 9))
    p = rng.standard_normal((2, 7, 9))
    assert np.sum(_grad(u) * p) == pytest.approx(-np.sum(u * _div(p)), rel=1e-12)


def test_total_variation_loop():
    u = np.arange(12.0).reshape(3, 4) ** 2
    tv = 0.0
    for i in range(3):
        for j in range(4):
            dy = u[i + 1, j] - u[i, j] if i < 2 else 0.0
            dx = u[i, j + 1] - u[i, j] if j < 3 else 0.0
            tv += math.hypot(dx, dy)
    assert total_variation(u) == pytest.approx(tv, rel=1e-14)


def test_tv_l1_salt_and_pepper(rng):
    clean = np.full((64, 64), 0.5)
    noisy = clean.copy()
    mask = rng.random(clean.shape) < 0.05
    noisy[mask] = rng.integers(0, 2, mask.sum()).astype(float)
    res = tv_denoise_l1(RealImage(noisy, 1e-6), lam=1.5, iterations=100)
    assert np.mean(np.abs(res.image.data - clean) <= 1e-2) >= 0.99
    assert len(res.objective) == len(res.iterate_objective) == 100
    assert all(b <= a for a, b in zip(res.objective, res.objective[1:]))
    assert res.objective[-1] == pytest.approx(tv_l1_objective(res.image.data, noisy, 1.5))
    assert res.objective[-1] < tv_l1_objective(noisy, noisy, 1.5)


def test_tv_l1_constant_is_fixed_point():
    f = np.full((8, 8), 0.3)
    res = tv_denoise_l1(RealImage(f, 1e-6), iterations=5)
    np.testing.assert_array_equal(res.image.data, f)


def test_projections():
    psi = np.array([[3 + 4j, 0j], [1j, -2.0]])
    out = detector_projection(psi, np.full((2, 2), 2.0))
    np.testing.assert_allclose(out, [[1.2 + 1.6j, 2.0], [2j, -2.0]])
    cfg = IterativeConfig(support=np.array([[True, False], [True, True]]), amplitude_bounds=(0.5, 1.0))
    np.testing.assert_allclose(object_projection(psi, cfg), [[0.6 + 0.8j, 1.0], [1j, -1.0]])


def test_iterative_config_validation():
    with pytest.raises(ValueError):
        IterativeConfig(iterations=0)
    with pytest.raises(ValueError):
        IterativeConfig(relaxation=1.5)
    with pytest.raises(ValueError):
        IterativeConfig(amplitude_bounds=(2.0, 1.0))


def _phase_object(n=64, seed=0):
    material = MaterialSpec(1e-3, 0.0)
    scene = sample_scene(seed, SceneParams(frame=n))
    t = render_thickness(scene, 5e-8)
    optics = OpticsConfig(1e-10, 0.1, 1e-6)
    obj = transmissivity(t, material, 1e-10)
    return obj, t.data > 0, forward_intensity(obj, optics), optics


def test_alternating_projections_reduce_residual():
    _, support, image, optics = _phase_object()
    res = alternating_projection_retrieve(image, optics, IterativeConfig(200, support), seed=1)
    assert len(res.residuals) == 200
    assert res.residuals[-1] <= 0.2 * res.residuals[0]
    again = alternating_projection_retrieve(image, optics, IterativeConfig(200, support), seed=1)
    np.testing.assert_array_equal(again.field.data, res.field.data)


def test_alternating_projections_trace_length_and_errors():
    _, support, image, optics = _phase_object(32)
    assert len(alternating_projection_retrieve(image, optics, IterativeConfig(1, support)).residuals) == 1
    with pytest.raises(ShapeError):
        alternating_projection_retrieve(image, optics, IterativeConfig(3, np.ones((8, 8), bool)))
