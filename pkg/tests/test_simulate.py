import math

import numpy as np
import pytest

from beamkit.errors import SceneError
from beamkit.simulate import (
    SPEED_OF_SOUND,
    SceneConfig,
    oracle_irm,
    si_snr,
    synthesize_scene,
    validate_delays,
)
from beamkit.spectral import StftConfig, stft


def test_same_seed_is_bit_identical():
    cfg = SceneConfig(duration_s=1.0, seed=42)
    a = synthesize_scene(cfg)
    b = synthesize_scene(cfg)
    assert a.mixture.samples.tobytes() == b.mixture.samples.tobytes()
    assert a.noise_image.samples.tobytes() == b.noise_image.samples.tobytes()
    for left, right in zip(a.source_images, b.source_images):
        assert left.samples.tobytes() == right.samples.tobytes()


def test_mixture_is_exact_sum_of_images_and_noise():
    scene = synthesize_scene(SceneConfig(duration_s=1.0, seed=3))
    acc = np.zeros_like(scene.mixture.samples)
    for image in scene.source_images:
        acc = acc + image.samples
    acc = acc + scene.noise_image.samples
    assert np.array_equal(acc, scene.mixture.samples)


def test_noise_free_zero_delay_scene_has_identical_channels():
    scene = synthesize_scene(
        SceneConfig(
            mics=3, speakers=1, azimuths=(0.0,), snr_db=math.inf, duration_s=0.5, seed=5
        )
    )
    assert not scene.noise_image.samples.any()
    for ch in range(1, 3):
        assert np.allclose(
            scene.mixture.samples[ch], scene.mixture.samples[0], atol=1e-12
        )


def test_endfire_tdoa_matches_cross_correlation():
    # Two mics 10 cm apart, source along the array axis: the encoded arrival
    # gap is d/c ~ 2.94e-4 s, i.e. about 4.7 samples at 16 kHz.
    scene = synthesize_scene(
        SceneConfig(
            mics=2,
            speakers=1,
            mic_spacing=0.1,
            azimuths=(90.0,),
            snr_db=math.inf,
            duration_s=2.0,
            seed=9,
        )
    )
    expected = 0.1 / SPEED_OF_SOUND
    assert abs(abs(scene.delays[0, 1] - scene.delays[0, 0]) - expected) < 1e-12
    a, b = scene.mixture.samples
    corr = np.correlate(a, b, mode="full")
    lag = int(np.argmax(corr)) - (len(b) - 1)
    assert abs(abs(lag) - expected * 16000) <= 1.0


def test_supersonic_delays_rejected():
    with pytest.raises(SceneError):
        validate_delays(np.array([0.0, 0.05]), np.array([0.0, 0.05 / SPEED_OF_SOUND * 3.0]))


def test_invalid_configs_rejected():
    with pytest.raises(SceneError):
        SceneConfig(speakers=3)
    with pytest.raises(SceneError):
        SceneConfig(speakers=2, azimuths=(10.0,))
    with pytest.raises(SceneError):
        SceneConfig(noise_kind="pink")


class TestOracleMasks:
    def test_noise_free_single_source_mask_is_one_on_active_bins(self):
        scene = synthesize_scene(
            SceneConfig(speakers=1, azimuths=(30.0,), snr_db=math.inf, duration_s=1.0, seed=2)
        )
        masks = oracle_irm(scene, StftConfig())
        assert set(masks) == {"target", "noise"}
        ref_image = scene.source_images[0].samples[0]
        from beamkit.spectral import AudioBuffer

        power = np.abs(stft(AudioBuffer(ref_image), StftConfig()).data[0]) ** 2
        active = power > 1e-9
        assert np.all(masks["target"][active] > 0.999999)

    def test_masks_form_a_per_bin_simplex(self):
        scene = synthesize_scene(SceneConfig(duration_s=1.0, seed=7))
        masks = oracle_irm(scene, StftConfig())
        stacked = np.stack(list(masks.values()))
        assert stacked.min() >= 0.0 and stacked.max() <= 1.0
        assert np.abs(stacked.sum(axis=0) - 1.0).max() < 1e-12

    def test_equal_power_bins_split_evenly(self):
        # Hand-built scene output with identical target and noise images.
        scene = synthesize_scene(
            SceneConfig(speakers=1, azimuths=(0.0,), snr_db=math.inf, duration_s=0.5, seed=3)
        )
        scene.noise_image.samples[:] = scene.source_images[0].samples
        masks = oracle_irm(scene, StftConfig())
        active = masks["target"] > 0.0
        spread = np.abs(masks["target"] - masks["noise"])[active]
        assert spread.max() < 1e-9


class TestSiSnr:
    def test_identical_signals_hit_the_cap(self, rng):
        x = rng.standard_normal(4000)
        assert si_snr(x, x) == 60.0

    def test_scale_invariance(self, rng):
        x = rng.standard_normal(4000)
        assert si_snr(x, -3.7 * x) == 60.0

    def test_orthogonal_estimate_matches_projection_oracle(self, rng):
        n = 4096
        t = np.arange(n)
        ref = np.sin(2 * np.pi * 5 * t / n)
        est = np.cos(2 * np.pi * 5 * t / n) + 1e-4 * ref
        value = si_snr(ref, est)
        ref0 = ref - ref.mean()
        est0 = est - est.mean()
        proj = (est0 @ ref0) / (ref0 @ ref0) * ref0
        resid = est0 - proj
        expected = 10 * math.log10((proj @ proj) / (resid @ resid))
        assert value == pytest.approx(expected, abs=1e-9)
        assert value < -40.0

    def test_zero_reference_rejected(self, rng):
        with pytest.raises(ValueError):
            si_snr(np.zeros(100), rng.standard_normal(100))

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            si_snr(rng.standard_normal(10), rng.standard_normal(11))

    def test_monotone_in_perturbation_size(self, rng):
        # Shrinking the perturbation raises the score, up to the +60 cap.
        x = rng.standard_normal(4000)
        noise = rng.standard_normal(4000)
        scores = [si_snr(x, x + eps * noise) for eps in (1e-1, 3e-2, 1e-2, 3e-3)]
        assert all(a < b for a, b in zip(scores, scores[1:]))
        assert si_snr(x, x + 1e-7 * noise) == 60.0
