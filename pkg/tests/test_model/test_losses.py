# ============================================================================
# tests/test_model/test_losses.py
# ============================================================================

"""
Tests for Loss Composition
==========================
"""

import math

import pytest
import torch

from found_tts.core.common import TrainMode
from found_tts.core.config import TrainConfig
from found_tts.model.acoustic import AcousticModel
from found_tts.model.losses import LossTerms, compose_losses, masked_mel_loss, masked_mse, stop_token_loss


class TestMaskedLosses:
    """Test the masked frame losses"""

    def test_padding_contributes_nothing(self):
        """Test differences on padded frames are ignored"""
        target = torch.zeros(1, 4, 3)
        predicted = target.clone()
        predicted[0, 2:] = 100.0
        mask = torch.tensor([[True, True, False, False]])

        assert float(masked_mel_loss(predicted, target, mask)) == 0.0
        assert float(masked_mse(predicted, target, mask)) == 0.0

    def test_l1_plus_l2(self):
        """Test a unit difference costs one for each norm"""
        mask = torch.ones(2, 3, dtype=torch.bool)

        assert float(masked_mel_loss(torch.ones(2, 3, 4), torch.zeros(2, 3, 4), mask)) == pytest.approx(2.0)
        assert float(masked_mse(torch.full((2, 3, 4), 3.0), torch.zeros(2, 3, 4), mask)) == pytest.approx(9.0)

    def test_stop_token(self):
        """Test zero logits cost log 2 per valid frame"""
        mask = torch.tensor([[True, True, False]])
        loss = stop_token_loss(torch.tensor([[0.0, 0.0, 50.0]]), torch.tensor([[0.0, 1.0, 0.0]]), mask)

        assert float(loss) == pytest.approx(math.log(2))


class TestLossTerms:
    """Test total and reporting"""

    def test_total(self):
        """Test reconstruction terms add and the noise term is weighted"""
        terms = LossTerms(mel=torch.tensor(1.0), stop=torch.tensor(0.5), vq_recon=torch.tensor(0.25),
                          codebook=torch.tensor(0.125), commitment=torch.tensor(0.125),
                          noise_ce=torch.tensor(2.0), beta=0.5)

        assert float(terms.reconstruction) == pytest.approx(2.0)
        assert float(terms.total) == pytest.approx(3.0)

    def test_as_dict(self):
        """Test only active terms are reported"""
        summary = LossTerms(mel=torch.tensor(1.0), stop=torch.tensor(0.5)).as_dict()

        assert summary == {'mel': 1.0, 'stop': 0.5, 'total': 1.5}


class TestComposeLosses:
    """Test loss composition per mode"""

    def _outputs(self, config, batch, use_vq, use_adversarial):
        model = AcousticModel(config, 6, use_vq, use_adversarial)
        return model(batch.text, batch.text_lengths, batch.mel_inputs, batch.speakers, batch.conditions,
                     batch.frame_mask)

    def test_baseline(self, micro_config, micro_batch):
        """Test the baseline has mel and stop terms only"""
        terms = compose_losses(self._outputs(micro_config, micro_batch, False, False), micro_batch, TrainConfig())

        assert set(terms.as_dict()) == {'mel', 'stop', 'total'}
        assert torch.isfinite(terms.total)

    def test_both_branches(self, micro_config, micro_batch):
        """Test every term is active with both branches"""
        outputs = self._outputs(micro_config, micro_batch, True, True)
        terms = compose_losses(outputs, micro_batch, TrainConfig(mode="both", beta=0.5))

        assert set(terms.as_dict()) == {'mel', 'stop', 'vq_recon', 'codebook', 'commitment', 'noise_ce', 'total'}
        assert terms.beta == 0.5
        terms.total.backward()

    def test_mode_override(self, micro_config, micro_batch):
        """Test an explicit mode drops branch terms"""
        outputs = self._outputs(micro_config, micro_batch, True, True)
        terms = compose_losses(outputs, micro_batch, TrainConfig(mode="both"), mode=TrainMode.BASELINE)

        assert terms.noise_ce is None and terms.codebook is None

    def test_mode_additive(self, micro_config, micro_batch):
        """Test the full objective is the baseline plus VQ terms and the weighted noise term"""
        outputs = self._outputs(micro_config, micro_batch, True, True)
        train = TrainConfig(mode="both", beta=0.75)

        both = compose_losses(outputs, micro_batch, train)
        baseline = compose_losses(outputs, micro_batch, train, mode=TrainMode.BASELINE)

        branch_terms = both.vq_recon + both.codebook + both.commitment + 0.75 * both.noise_ce
        assert float(both.total - baseline.total) == pytest.approx(float(branch_terms), abs=1e-5)
        assert float(baseline.total) == pytest.approx(float(both.mel + both.stop), abs=1e-6)

    def test_missing_branch(self, micro_config, micro_batch):
        """Test a mode whose branch the forward pass did not run"""
        outputs = self._outputs(micro_config, micro_batch, False, False)

        with pytest.raises(ValueError, match="VQ"):
            compose_losses(outputs, micro_batch, TrainConfig(mode="vq"))
        with pytest.raises(ValueError, match="noise classifier"):
            compose_losses(outputs, micro_batch, TrainConfig(mode="adversarial"))
