import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holoretrieve import pfd
from holoretrieve.field import ComplexField, OpticsConfig, RealImage
from holoretrieve.optics import forward_intensity
from holoretrieve.synth import (
    MaterialSpec,
    NoiseModel,
    SceneParams,
    SynthParams,
    cosine_modes,
    flat_field_model,
    frame_seeds,
    generate_dataset,
    hologram_from_scene,
    object_wave,
    phase_clamp_thickness,
    render_thickness,
    sample_flat_field,
    sample_scene,
    simulate_hologram,
    transmissivity,
)

WL = 1e-10


def test_transmissivity_scalar_values():
    # direct scalar evaluation: phase -k*delta*t, amplitude exp(-k*beta*t)
    t = RealImage(np.full((2, 2), 10e-9), 1e-6)
    psi = transmissivity(t, MaterialSpec(1e-3, 1e-6), WL)
    assert abs(psi.phase().data[0, 0] - (-0.628319)) <= 1e-6
    assert abs(psi.amplitude().data[0, 0] - 0.9993719) <= 1e-6


def test_transmissivity_illumination_and_errors():
    t = RealImage(np.zeros((3, 3)), 1e-6)
    illum = ComplexField(np.full((3, 3), 0.5j), 1e-6)
    np.testing.assert_array_equal(transmissivity(t, MaterialSpec(), WL, illum).data, illum.data)
    with pytest.raises(ValueError):
        transmissivity(RealImage(-np.ones((3, 3)), 1e-6), MaterialSpec(), WL)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_max=st.integers(1, 30), frame=st.integers(8, 64))
def test_scene_bounds(seed, n_max, frame):
    p = SceneParams(n_max=n_max, frame=frame)
    s = sample_scene(seed, p)
    lo, hi = p.extent_range
    assert 1 <= len(s.shapes) <= n_max
    for sh in s.shapes:
        assert 0 < sh.thickness <= p.t_max
        assert all(lo <= e <= hi for e in sh.half_extents)
        assert 0 <= sh.center[0] < frame and 0 <= sh.center[1] < frame
    assert sample_scene(seed, p) == s


def test_render_matches_shape_loop():
    scene = sample_scene(5, SceneParams(frame=24, n_max=6))
    t = render_thickness(scene).data
    ref = np.zeros((24, 24))
    for yy in range(24):
        for xx in range(24):
            for sh in scene.shapes:
                cx, cy = sh.center
                a, b = sh.half_extents
                if sh.kind == "rectangle":
                    inside = abs(xx - cx) <= a and abs(yy - cy) <= b
                else:
                    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= a * a
                ref[yy, xx] += sh.thickness if inside else 0.0
    np.testing.assert_allclose(t, ref, rtol=1e-15)


def test_phase_clamp():
    m = MaterialSpec(1e-3, 1e-6)
    cap = phase_clamp_thickness(m, WL)
    assert cap == pytest.approx(5e-8)
    scene = sample_scene(0, SceneParams(frame=32, n_max=25, t_max=1e-7))
    t = render_thickness(scene, cap)
    psi = transmissivity(t, m, WL)
    phase = -2 * math.pi / WL * m.delta * t.data
    assert phase.min() >= -math.pi - 1e-12
    assert np.isinf(phase_clamp_thickness(MaterialSpec(0.0, 1e-6), WL))
    assert psi.shape == (32, 32)


def test_cosine_modes_orthonormal():
    modes = cosine_modes(20, 12, 15)
    gram = np.einsum("mij,nij->mn", modes, modes)
    np.testing.assert_allclose(gram, np.eye(15), atol=1e-12)
    # first modes: (u, v) = (0, 1), (1, 0)
    y = (np.arange(12) + 0.5) / 12
    expect = np.outer(np.cos(np.pi * y), np.ones(20))
    np.testing.assert_allclose(modes[0], expect / np.linalg.norm(expect), atol=1e-14)


def test_flat_field_statistics_and_floor():
    model = flat_field_model(32, 32, 1e-6)
    f = sample_flat_field(model, 3)
    assert np.all(f.data.imag == 0) and f.data.real.min() >= 0.05
    np.testing.assert_array_equal(sample_flat_field(model, 3).data, f.data)
    # coefficients are recoverable by projection (orthonormal modes, no floor active)
    c = np.einsum("mij,ij->m", model.mode_images, f.data.real - 1)
    assert np.all(np.abs(c) < 0.05 * 6)
    big = flat_field_model(8, 8, 1e-6, coefficient_sigma=50.0)
    assert sample_flat_field(big, 0).data.real.min() == pytest.approx(0.05)


def test_photon_budget(rng):
    optics = OpticsConfig(WL, 0.1, 1e-6)
    totals = []
    for i in range(20):
        psi = ComplexField(np.exp(1j * rng.random((32, 32))), 1e-6)
        ideal = forward_intensity(psi, optics).data.sum()
        holo = simulate_hologram(psi, optics, NoiseModel(), seed=i)
        totals.append(holo.data.sum() / ideal * 6.6e7)
    assert abs(np.mean(totals) / 6.6e7 - 1) < 5e-3


def test_noise_disabled_is_ideal(rng, optics):
    psi = ComplexField(np.exp(1j * rng.random((16, 16))), 1e-6)
    a = simulate_hologram(psi, optics, NoiseModel(enabled=False), 0)
    np.testing.assert_array_equal(a.data, forward_intensity(psi, optics).data)


def test_frame_seeds_pairing():
    p = frame_seeds(7, 3, "paired")
    u = frame_seeds(7, 3, "unpaired")
    assert p.object_scene == p.hologram_scene == u.object_scene
    assert u.hologram_scene != u.object_scene
    assert len({u.object_scene, u.hologram_scene, u.flat_field, u.noise}) == 4
    assert frame_seeds(7, 4, "paired").object_scene != p.object_scene


def small_params():
    return SynthParams(scene=SceneParams(frame=16, n_max=4))


def test_paired_hologram_uses_object_scene():
    params = small_params()
    s = frame_seeds(0, 0, "paired")
    obj, t = object_wave(s.object_scene, params)
    noiseless = SynthParams(params.optics, params.material, params.scene, flat_field_sigma=0.0,
                            noise=NoiseModel(enabled=False))
    holo = hologram_from_scene(s.hologram_scene, s.flat_field, s.noise, noiseless)
    np.testing.assert_allclose(holo.data, forward_intensity(obj, params.optics).data, rtol=1e-12)


@pytest.mark.parametrize("pairing", ["paired", "unpaired"])
def test_generate_dataset_deterministic(tmp_path, pairing):
    a = generate_dataset(tmp_path / "a", 3, small_params(), seed=11, pairing=pairing)
    generate_dataset(tmp_path / "b", 3, small_params(), seed=11, pairing=pairing)
    for rel in ["manifest.json"] + [f[k] for f in a["frames"] for k in ("object", "hologram")]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert m["pairing"] == pairing and m["n_frames"] == 3 and m["format_version"] == 1
    assert isinstance(pfd.load(tmp_path / "a" / m["frames"][0]["object"]), ComplexField)
    assert isinstance(pfd.load(tmp_path / "a" / m["frames"][0]["hologram"]), RealImage)


def test_default_constants_in_manifest(tmp_path):
    m = generate_dataset(tmp_path, 1, SynthParams(scene=SceneParams(frame=8)))
    p = m["params"]
    assert p["optics"] == {"wavelength": 1e-10, "distance": 0.1, "pixel_size": 1e-6}
    assert p["material"] == {"delta": 1e-3, "beta": 1e-6}
    assert p["noise"]["total_photons"] == 6.6e7


def test_generate_dataset_rejects_bad_args(tmp_path):
    with pytest.raises(ValueError):
        generate_dataset(tmp_path, 0)
    with pytest.raises(ValueError):
        generate_dataset(tmp_path, 1, pairing="both")
