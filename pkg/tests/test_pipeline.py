import numpy as np
import pytest

from rectified_i2v.denoisers import (BiasSpec, DenoiserHandle, biased_denoiser,
                                     gmm_optimal_denoiser, oracle_noise_denoiser)
from rectified_i2v.errors import ShapeError
from rectified_i2v.fileio import read_vlt1, write_vlt1
from rectified_i2v.pipeline import RunManifest, generate_video, initial_noise
from rectified_i2v.rectifier import omega_ramp
from rectified_i2v.samplers import SamplerKind, make_step_plan
from rectified_i2v.schedule import ImageLatent, make_linear_schedule, repeat_image
from rectified_i2v.synthprior import quadrant_blob_prior

S = make_linear_schedule()
PRIOR = quadrant_blob_prior(6, grid=(8, 8))
DEN = biased_denoiser(gmm_optimal_denoiser(PRIOR, S), BiasSpec(0.3, seed=1))
Z0 = ImageLatent(PRIOR.components[2].means[0], PRIOR.dims)
PLAN = make_step_plan(S, 25)


def test_full_rectification_reproduces_reference():
    video, m = generate_video(Z0, None, 6, np.zeros(6), (0, 1), DEN, PLAN, SamplerKind(), 3, S)
    np.testing.assert_allclose(video.data, repeat_image(Z0, 6).data, atol=1e-5)
    assert m.status == "ok" and m.tau == (0.0, 1.0)


def test_frame_zero_preserved_for_any_omega():
    video, _ = generate_video(Z0, None, 6, omega_ramp(6, 0.2), (0, 1), DEN, PLAN, SamplerKind(),
                              4, S)
    np.testing.assert_allclose(video.data[0], Z0.data, atol=1e-5)
    assert not np.allclose(video.data[-1], Z0.data, atol=1e-3)


def test_empty_window_equals_no_rectifier():
    a, ma = generate_video(Z0, None, 6, omega_ramp(6), (0, 0), DEN, PLAN, SamplerKind(), 5, S)
    b, mb = generate_video(Z0, None, 6, omega_ramp(6), None, DEN, PLAN, SamplerKind(), 5, S)
    assert a.data.tobytes() == b.data.tobytes()
    assert ma.output_sha256 == mb.output_sha256


def test_oracle_factory_receives_initial_noise():
    video, m = generate_video(Z0, None, 6, omega_ramp(6), None, oracle_noise_denoiser, PLAN,
                              SamplerKind(), 7, S)
    np.testing.assert_allclose(video.data, repeat_image(Z0, 6).data, atol=1e-9)
    assert m.denoiser_id == "oracle"
    assert initial_noise(7, 6, PRIOR.dims).shape == (6, 64)


def test_error_manifest_records_cause():
    def boom(z, c, t):
        raise FloatingPointError("overflow in step")

    with pytest.raises(FloatingPointError) as info:
        generate_video(Z0, None, 6, omega_ramp(6), (0, 0.6), DenoiserHandle(boom, "boom"), PLAN,
                       SamplerKind(), 1, S)
    m = info.value.manifest
    assert m.status == "error" and m.error == "numeric: overflow in step"
    with pytest.raises(ShapeError) as info:
        generate_video(Z0, None, 6, omega_ramp(5), (0, 0.6), DEN, PLAN, SamplerKind(), 1, S)
    assert info.value.manifest.error.startswith("shape: ")


def test_manifest_and_video_round_trip(tmp_path):
    video, m = generate_video(Z0, None, 6, omega_ramp(6), (0, 0.6), DEN, PLAN,
                              SamplerKind("ddim", 0.5), 9, S, prior_id=PRIOR.id)
    m.extra["note"] = "x = y"
    back = RunManifest.from_text(m.to_text())
    assert back == m and back.sha256() == m.sha256()
    path = write_vlt1(tmp_path / "v.vlt1", video)
    assert read_vlt1(path).data.tobytes() == video.data.astype("<f4").astype(float).tobytes()


def test_stochastic_sampler_is_seed_deterministic():
    sampler = SamplerKind("ddim", 1.0)
    a, _ = generate_video(Z0, None, 6, omega_ramp(6), (0, 0.6), DEN, PLAN, sampler, 2, S)
    b, _ = generate_video(Z0, None, 6, omega_ramp(6), (0, 0.6), DEN, PLAN, sampler, 2, S)
    c, _ = generate_video(Z0, None, 6, omega_ramp(6), (0, 0.6), DEN, PLAN, sampler, 3, S)
    assert a.data.tobytes() == b.data.tobytes() != c.data.tobytes()
