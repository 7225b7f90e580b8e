import numpy as np
import pytest

from beamkit.beamform import (
    BeamformerWeights,
    apply_beamformer,
    delay_and_sum,
    mvdr_weights,
    noisy_covariance,
    steering_vector,
    weighted_covariance,
)
from beamkit.spectral import AudioBuffer, MultichannelSpectrum, StftConfig, istft, stft
from beamkit.simulate import SceneConfig, si_snr, synthesize_scene
from helpers import loop_weighted_covariance, random_spectrum


class TestCovariances:
    def test_single_frame_is_the_outer_product(self, rng):
        spec = random_spectrum(rng, channels=2, bins=5, frames=1)
        cov = noisy_covariance(spec)
        for f in range(5):
            y = spec.data[:, f, 0]
            assert np.allclose(cov.matrices[f], np.outer(y, y.conj()), atol=1e-14)

    def test_zero_block_gives_zero_matrices(self):
        spec = MultichannelSpectrum(
            np.zeros((2, 5, 4), dtype=np.complex128), frame_hop=4, fft_size=8, sample_rate=16000
        )
        assert not noisy_covariance(spec).matrices.any()

    def test_noisy_matches_loop_oracle(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=16)
        cov = noisy_covariance(spec)
        oracle = loop_weighted_covariance(spec.data, np.ones((4, 16)))
        assert np.abs(cov.matrices - oracle).max() < 1e-12

    def test_uniform_mask_equals_noisy(self, rng):
        spec = random_spectrum(rng, channels=3, bins=6, frames=10)
        a = noisy_covariance(spec).matrices
        b = weighted_covariance(spec, np.ones((6, 10))).matrices
        assert np.abs(a - b).max() < 1e-13

    def test_one_hot_mask_selects_one_frame(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=8)
        mask = np.zeros((4, 8))
        mask[:, 5] = 1.0
        cov = weighted_covariance(spec, mask)
        for f in range(4):
            y = spec.data[:, f, 5]
            assert np.allclose(cov.matrices[f], np.outer(y, y.conj()), atol=1e-13)

    def test_weighted_matches_loop_oracle(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=16)
        mask = rng.uniform(0.1, 1.0, (4, 16))
        cov = weighted_covariance(spec, mask)
        oracle = loop_weighted_covariance(spec.data, mask)
        assert np.abs(cov.matrices - oracle).max() < 1e-12
        assert not cov.fallback_bins.any()

    def test_empty_mask_falls_back_to_noisy(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=8)
        mask = np.zeros((4, 8))
        mask[0] = 0.5
        cov = weighted_covariance(spec, mask)
        assert list(cov.fallback_bins) == [False, True, True, True]
        plain = noisy_covariance(spec).matrices
        assert np.allclose(cov.matrices[1:], plain[1:], atol=1e-14)

    def test_mask_shape_mismatch_rejected(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=8)
        with pytest.raises(ValueError):
            weighted_covariance(spec, np.ones((4, 9)))

    def test_weighted_output_is_hermitian_psd(self, rng):
        spec = random_spectrum(rng, channels=3, bins=5, frames=12)
        mask = rng.uniform(0.0, 1.0, (5, 12))
        mats = weighted_covariance(spec, mask).matrices
        assert np.abs(mats - np.conj(np.swapaxes(mats, 1, 2))).max() < 1e-12
        for f in range(5):
            eigs = np.linalg.eigvalsh(mats[f])
            assert eigs.min() >= -1e-10 * np.trace(mats[f]).real

    def test_scaling_block_scales_covariance_quadratically(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=8)
        scale = 3.0 - 4.0j
        scaled = MultichannelSpectrum(
            spec.data * scale, spec.frame_hop, spec.fft_size, spec.sample_rate
        )
        a = noisy_covariance(spec).matrices
        b = noisy_covariance(scaled).matrices
        assert np.abs(b - abs(scale) ** 2 * a).max() < 1e-10


class TestSteeringVector:
    def test_rank_one_recovers_direction(self):
        h = np.array([1.0, 1j])
        cov = noisy_like(np.outer(h, h.conj())[None])
        vec = steering_vector(cov, reference=0)
        assert np.allclose(vec[0], h, atol=1e-10)

    def test_identity_tie_break(self):
        cov = noisy_like(np.eye(2, dtype=np.complex128)[None])
        vec = steering_vector(cov, reference=0)
        assert np.allclose(vec[0], [1.0, 0.0], atol=1e-12)

    def test_noisy_rank_one_angle(self, rng):
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        noise = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        mat = np.outer(h, h.conj()) + 1e-8 * noise @ noise.conj().T
        vec = steering_vector(noisy_like(mat[None]), reference=0)[0]
        cosine = abs(np.vdot(vec, h)) / (np.linalg.norm(vec) * np.linalg.norm(h))
        assert np.arccos(min(cosine, 1.0)) < 1e-3

    def test_reference_fallback_when_entry_vanishes(self):
        h = np.array([0.0, 1.0 + 0.0j])
        vec = steering_vector(noisy_like(np.outer(h, h.conj())[None]), reference=0)[0]
        # Anchored on the strongest channel instead.
        assert vec[1] == pytest.approx(1.0)

    def test_direction_invariant_under_block_scaling(self, rng):
        spec = random_spectrum(rng, channels=3, bins=4, frames=10)
        mask = rng.uniform(0.2, 1.0, (4, 10))
        v1 = steering_vector(weighted_covariance(spec, mask))
        scaled = MultichannelSpectrum(
            spec.data * (2.0 - 1.0j), spec.frame_hop, spec.fft_size, spec.sample_rate
        )
        v2 = steering_vector(weighted_covariance(scaled, mask))
        assert np.abs(v1 - v2).max() < 1e-8


class TestMvdrWeights:
    def test_single_channel_inverts_the_gain(self):
        cov = noisy_like(np.array([[[2.0 + 0.0j]]]))
        h = np.array([[0.5 + 0.5j]])
        weights = mvdr_weights(cov, h, loading=0.0)
        assert np.allclose(weights.weights, h / np.abs(h) ** 2, atol=1e-14)

    def test_identity_covariance_keeps_steering(self):
        cov = noisy_like(np.eye(2, dtype=np.complex128)[None])
        weights = mvdr_weights(cov, np.array([[1.0, 0.0]]), loading=0.0)
        assert np.allclose(weights.weights[0], [1.0, 0.0], atol=1e-14)

    def test_two_by_two_closed_form(self):
        cov = noisy_like(np.diag([2.0, 1.0]).astype(np.complex128)[None])
        weights = mvdr_weights(cov, np.array([[1.0, 1.0]]), loading=0.0)
        assert np.allclose(weights.weights[0], [1.0 / 3.0, 2.0 / 3.0], atol=1e-14)
        assert np.vdot(weights.weights[0], weights.steering[0]) == pytest.approx(1.0)

    def test_distortionless_constraint_random(self, rng):
        for dim in (2, 4, 8):
            for _ in range(10):
                base = rng.standard_normal((dim, 2 * dim)) + 1j * rng.standard_normal(
                    (dim, 2 * dim)
                )
                r_y = (base @ base.conj().T / (2 * dim))[None]
                h = (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))[None]
                weights = mvdr_weights(noisy_like(r_y), h)
                gain = np.vdot(weights.weights[0], weights.steering[0])
                assert abs(gain - 1.0) < 1e-8

    def test_singular_covariance_falls_back(self):
        cov = noisy_like(np.zeros((1, 2, 2), dtype=np.complex128))
        h = np.array([[1.0, 1j]])
        weights = mvdr_weights(cov, h, loading=0.0)
        assert weights.fallback_bins[0]
        assert np.vdot(weights.weights[0], h[0]) == pytest.approx(1.0)


class TestApplyBeamformer:
    def test_selector_weight_picks_channel_zero(self, rng):
        spec = random_spectrum(rng, channels=3, bins=4, frames=6)
        w = np.zeros((4, 3), dtype=np.complex128)
        w[:, 0] = 1.0
        out = apply_beamformer(spec, weights_like(w))
        assert np.array_equal(out, spec.data[0])

    def test_distortionless_identity_on_clean_steered_signal(self, rng):
        h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        s = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        data = h[:, None, None] * s[None]
        spec = MultichannelSpectrum(data, frame_hop=3, fft_size=6, sample_rate=16000)
        # Any weights with w^H h = 1 must return s exactly.
        w = np.tile((h / np.vdot(h, h).real)[None], (4, 1))
        out = apply_beamformer(spec, weights_like(w))
        assert np.abs(out - s).max() < 1e-10

    def test_matches_loop_oracle(self, rng):
        spec = random_spectrum(rng, channels=2, bins=4, frames=5)
        w = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        out = apply_beamformer(spec, weights_like(w))
        for f in range(4):
            for t in range(5):
                expected = sum(
                    w[f, i].conjugate() * spec.data[i, f, t] for i in range(2)
                )
                assert out[f, t] == pytest.approx(expected, abs=1e-12)

    def test_linear_in_the_block(self, rng):
        a = random_spectrum(rng, channels=2, bins=4, frames=5)
        b = random_spectrum(rng, channels=2, bins=4, frames=5)
        w = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        summed = MultichannelSpectrum(a.data + b.data, a.frame_hop, a.fft_size, a.sample_rate)
        lhs = apply_beamformer(summed, weights_like(w))
        rhs = apply_beamformer(a, weights_like(w)) + apply_beamformer(b, weights_like(w))
        assert np.abs(lhs - rhs).max() < 1e-12


class TestDelayAndSum:
    def test_zero_delays_average_channels(self, rng):
        spec = random_spectrum(rng, channels=3, bins=4, frames=5)
        out = delay_and_sum(spec, np.zeros(3))
        assert np.abs(out - spec.data.mean(axis=0)).max() < 1e-13

    def test_single_channel_identity(self, rng):
        spec = random_spectrum(rng, channels=1, bins=4, frames=5)
        out = delay_and_sum(spec, np.zeros(1))
        assert np.abs(out - spec.data[0]).max() < 1e-13

    def test_true_delays_beat_best_single_channel(self):
        scene = synthesize_scene(
            SceneConfig(
                mics=4,
                speakers=1,
                azimuths=(70.0,),
                snr_db=0.0,
                noise_kind="white",
                duration_s=3.0,
                seed=21,
            )
        )
        cfg = StftConfig()
        spec = stft(scene.mixture, cfg)
        out = delay_and_sum(spec, scene.delays[0])
        enhanced = istft(
            MultichannelSpectrum(out[None], spec.frame_hop, spec.fft_size, spec.sample_rate),
            cfg,
        )
        ref = scene.source_images[0].samples[0]
        das_score = si_snr(ref, enhanced.samples[0, : ref.size])
        best_single = max(
            si_snr(ref, scene.mixture.samples[ch]) for ch in range(4)
        )
        assert das_score > best_single


def noisy_like(mats):
    from beamkit.beamform import SpatialCovarianceSet

    mats = np.asarray(mats, dtype=np.complex128)
    return SpatialCovarianceSet(mats, 1, np.zeros(mats.shape[0], dtype=bool))


def weights_like(w):
    return BeamformerWeights(
        np.asarray(w, dtype=np.complex128),
        np.asarray(w, dtype=np.complex128),
        0,
        np.zeros(w.shape[0], dtype=bool),
    )
