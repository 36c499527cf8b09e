# ============================================================================
# tests/test_model/test_adversarial.py
# ============================================================================

"""
Tests for the Adversarial Noise Branch
======================================
"""

import math

import pytest
import torch

from found_tts.core.common import Granularity
from found_tts.model.adversarial import (
    AdversarialBranch, NoiseClassifier, adv_loss, noise_cross_entropy, sentence_pool,
)


class TestSentencePool:
    """Test [mean; variance] pooling"""

    def test_values(self):
        """Test mean and population variance over valid frames"""
        z_s = torch.tensor([[[1.0], [3.0], [100.0]]])
        mask = torch.tensor([[True, True, False]])

        pooled = sentence_pool(z_s, mask)

        torch.testing.assert_close(pooled, torch.tensor([[2.0, 1.0]]))

    def test_single_frame(self):
        """Test a one-frame utterance has zero variance"""
        pooled = sentence_pool(torch.tensor([[[4.0, -1.0]]]))

        torch.testing.assert_close(pooled, torch.tensor([[4.0, -1.0, 0.0, 0.0]]))


class TestAdversarialBranch:
    """Test the GRU branch"""

    def test_causal(self, micro_config):
        """Test future frames do not change earlier latents"""
        branch = AdversarialBranch(micro_config)
        frames = torch.randn(1, 6, micro_config.decoder_prenet_dims[-1])
        changed = frames.clone()
        changed[:, 4:] += 1.0

        z_a, _ = branch(frames)
        z_b, _ = branch(changed)

        assert z_a.shape == (1, 6, micro_config.adv_gru_dim)
        torch.testing.assert_close(z_a[:, :4], z_b[:, :4])
        assert not torch.allclose(z_a[:, 4:], z_b[:, 4:])

    def test_empty_input(self, micro_config):
        """Test zero frames are rejected"""
        with pytest.raises(ValueError, match="at least one frame"):
            AdversarialBranch(micro_config)(torch.zeros(1, 0, micro_config.decoder_prenet_dims[-1]))


class TestNoiseClassifier:
    """Test classifier shapes and reversed gradients"""

    def test_frame_logits(self, micro_config):
        """Test per-frame logits"""
        classifier = NoiseClassifier(micro_config, Granularity.FRAME)

        assert classifier(torch.randn(2, 5, micro_config.adv_gru_dim)).shape == (2, 5, 2)

    def test_sentence_logits(self, micro_config):
        """Test per-utterance logits"""
        classifier = NoiseClassifier(micro_config, Granularity.SENTENCE)
        mask = torch.tensor([[True] * 5, [True, True, False, False, False]])

        assert classifier(torch.randn(2, 5, micro_config.adv_gru_dim), mask).shape == (2, 2)

    def test_reversed_gradient(self, micro_config):
        """Test the latent gradient is the negated classifier gradient"""
        classifier = NoiseClassifier(micro_config, Granularity.FRAME)
        labels = torch.tensor([1])

        z_plain = torch.randn(1, 3, micro_config.adv_gru_dim, requires_grad=True)
        noise_cross_entropy(classifier.net(z_plain), labels).backward()
        z_rev = z_plain.detach().clone().requires_grad_(True)
        noise_cross_entropy(classifier(z_rev, lambda_=2.0), labels).backward()

        torch.testing.assert_close(z_rev.grad, -2.0 * z_plain.grad)


class TestNoiseLosses:
    """Test cross-entropy and the combined objective"""

    def test_uniform_logits(self):
        """Test zero logits give log 2 for frame and sentence logits"""
        labels = torch.tensor([0, 1])

        assert float(noise_cross_entropy(torch.zeros(2, 2), labels)) == pytest.approx(math.log(2))
        assert float(noise_cross_entropy(torch.zeros(2, 4, 2), labels)) == pytest.approx(math.log(2))

    def test_frame_mask(self):
        """Test padded frames are excluded"""
        logits = torch.tensor([[[5.0, 0.0], [0.0, 50.0]]])
        mask = torch.tensor([[True, False]])
        expected = float(torch.nn.functional.cross_entropy(torch.tensor([[5.0, 0.0]]), torch.tensor([0])))

        assert float(noise_cross_entropy(logits, torch.tensor([0]), mask)) == pytest.approx(expected)

    def test_adv_loss(self):
        """Test the weighted sum and the beta check"""
        assert float(adv_loss(torch.tensor(1.0), torch.tensor(2.0), 0.25)) == pytest.approx(1.5)
        with pytest.raises(ValueError, match="beta"):
            adv_loss(torch.tensor(1.0), torch.tensor(2.0), -0.1)
