import numpy as np
import pytest

from paintproc.backends import (
    SSIM_C1,
    SSIM_C2,
    BackendError,
    embedding_distance,
    gram_texture_distance,
    load_score_file,
    make_backend,
    mse_distance,
    sequence_embedding_lookup,
    ssim_distance,
)
from paintproc.media import EmbeddingSet, Frame

from conftest import constant_frame, random_frame


ALL_BACKENDS = [mse_distance, ssim_distance, gram_texture_distance]


class TestMse:
    def test_identical(self, rng):
        f = random_frame(rng)
        assert mse_distance(f, f) == 0.0

    def test_black_vs_white(self):
        assert mse_distance(constant_frame(0), constant_frame(255)) == pytest.approx(1.0)

    def test_black_vs_gray(self):
        expected = (128 / 255) ** 2
        assert mse_distance(constant_frame(0), constant_frame(128)) == pytest.approx(
            expected, abs=1e-12
        )

    def test_loop_oracle(self, rng):
        for _ in range(20):
            a, b = random_frame(rng), random_frame(rng)
            total = 0.0
            for y in range(8):
                for x in range(8):
                    for c in range(3):
                        d = a.pixels[y, x, c] / 255.0 - b.pixels[y, x, c] / 255.0
                        total += d * d
            assert mse_distance(a, b) == pytest.approx(total / (8 * 8 * 3), abs=1e-12)

    def test_resizes_to_smaller(self, rng):
        a = constant_frame(100, width=16, height=16)
        b = constant_frame(100, width=8, height=8)
        assert mse_distance(a, b) == 0.0

    def test_channel_mismatch(self):
        a = constant_frame(0, channels=3)
        b = constant_frame(0, channels=1)
        with pytest.raises(BackendError, match="channel"):
            mse_distance(a, b)


class TestSsim:
    def test_identical(self, rng):
        f = random_frame(rng, width=16, height=16)
        assert ssim_distance(f, f) == pytest.approx(0.0, abs=1e-12)

    def test_constant_black_vs_white_closed_form(self):
        # constant images: variances and covariance vanish, so
        # SSIM = C1 * C2 / ((mu1^2 + mu2^2 + C1) * C2)
        a = constant_frame(0, width=16, height=16)
        b = constant_frame(255, width=16, height=16)
        ssim = (SSIM_C1 * SSIM_C2) / ((0 + 255.0**2 + SSIM_C1) * SSIM_C2)
        assert ssim_distance(a, b) == pytest.approx(1.0 - ssim, abs=1e-12)

    def test_tiny_noise(self, rng):
        a = random_frame(rng, width=16, height=16)
        noise = rng.integers(-1, 2, size=a.pixels.shape)
        b = Frame(np.clip(a.pixels.astype(int) + noise, 0, 255).astype(np.uint8))
        assert ssim_distance(a, b) < 0.01

    def test_small_frame_global_fallback(self):
        a = constant_frame(10, width=4, height=4)
        assert ssim_distance(a, a) == pytest.approx(0.0, abs=1e-12)


class TestGramTexture:
    def test_identical(self, rng):
        f = random_frame(rng, width=32, height=32)
        assert gram_texture_distance(f, f) == 0.0

    def test_flat_vs_checkerboard(self):
        flat = constant_frame(128, width=64, height=64)
        yy, xx = np.mgrid[0:64, 0:64]
        checker = ((yy + xx) % 2 * 255).astype(np.uint8)
        board = Frame(np.repeat(checker[:, :, None], 3, axis=2))
        assert gram_texture_distance(flat, board) > 0.5

    def test_symmetry(self, rng):
        a = random_frame(rng, width=20, height=20)
        b = random_frame(rng, width=20, height=20)
        assert gram_texture_distance(a, b) == pytest.approx(
            gram_texture_distance(b, a), abs=1e-15
        )


class TestEmbeddingDistance:
    def test_identical(self):
        v = np.array([1.0, 2.0, 3.0])
        assert embedding_distance(v, v) == 0.0

    def test_opposed(self):
        v = np.array([1.0, -2.0, 0.5])
        assert embedding_distance(v, -v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert embedding_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.5

    def test_positive_scale_invariance(self, rng):
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        d = embedding_distance(a, b)
        assert embedding_distance(3.7 * a, b) == pytest.approx(d, abs=1e-12)
        assert embedding_distance(a, 0.01 * b) == pytest.approx(d, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(BackendError, match="zero vector"):
            embedding_distance(np.zeros(3), np.ones(3))

    def test_l2_mode(self):
        assert embedding_distance(
            np.array([0.0, 0.0]), np.array([3.0, 4.0]), mode="l2"
        ) == pytest.approx(5.0)

    def test_dimension_mismatch(self):
        with pytest.raises(BackendError, match="mismatch"):
            embedding_distance(np.ones(2), np.ones(3))


class TestEmbeddingLookup:
    def test_first(self):
        es = EmbeddingSet(np.array([[1.0, 2.0]]))
        assert np.array_equal(sequence_embedding_lookup(es, 0), [1.0, 2.0])

    def test_out_of_range(self):
        es = EmbeddingSet(np.array([[1.0, 2.0]]))
        with pytest.raises(IndexError):
            sequence_embedding_lookup(es, 1)


class TestPseudometricAxioms:
    @pytest.mark.parametrize("backend", ALL_BACKENDS)
    def test_axioms(self, backend, rng):
        for _ in range(10):
            a = random_frame(rng, width=16, height=16)
            b = random_frame(rng, width=16, height=16)
            assert backend(a, a) == pytest.approx(0.0, abs=1e-9)
            assert backend(a, b) >= 0.0
            assert backend(a, b) == pytest.approx(backend(b, a), abs=1e-12)


class TestRegistry:
    def test_known_ids(self):
        assert make_backend("mse").kind == "pixel-mse"
        assert make_backend("ssim").kind == "ssim"
        assert make_backend("gram").kind == "gram-texture"

    def test_unknown_id(self):
        with pytest.raises(BackendError, match="unknown backend"):
            make_backend("lpips")


class TestScoreFile:
    def test_parse(self, tmp_path):
        (tmp_path / "s.csv").write_text("index,distance\n0,0.5\n2,0.1\n1,0.3\n")
        assert load_score_file(tmp_path / "s.csv") == [(0, 0.5), (1, 0.3), (2, 0.1)]

    def test_bad_row(self, tmp_path):
        (tmp_path / "s.csv").write_text("0,0.5\n1,oops\n")
        with pytest.raises(BackendError, match="row 2"):
            load_score_file(tmp_path / "s.csv")
