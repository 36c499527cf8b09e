# =============================================================================
# found_tts/cli/selfcheck.py
# =============================================================================

"""
Self-check battery: gradient contracts, finite-difference checks of the
composed model pieces, quantizer brute-force equivalence and the corpus and
metric oracles. Every check reports the error it measured.
"""

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import torch
import torch.nn as nn

from ..core.common import NoiseCondition, NoiseKind, TrainMode
from ..core.config import CorpusConfig, ModelConfig, TrainConfig
from ..core.errors import FoundTTSError
from ..corpus.corruption import TranscriptCorruptor
from ..corpus.inventory import SymbolInventory
from ..corpus.noise import mix_noise
from ..corpus.render import render_waveform
from ..dsp.features import mel_spectrogram
from ..dsp.metrics import dtw_arrays, levenshtein, mcd, measure_snr
from ..model.acoustic import AcousticModel
from ..model.adversarial import noise_cross_entropy, sentence_pool
from ..model.attention import gmm_alignment
from ..model.batching import TrainingExample, collate
from ..model.gradients import finite_diff_check, gradient_reversal, stop_gradient, straight_through
from ..model.losses import compose_losses
from ..model.vq import quantize

__all__ = ['CheckResult', 'SelfCheck', 'micro_model_config']

logger = logging.getLogger(__name__)

REL_TOL = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def micro_model_config(attention: str = "gmm") -> ModelConfig:
    """Smallest model that still exercises every block"""
    return ModelConfig(
        n_mels=4, embedding_dim=8, encoder_prenet_dims=[8, 4], conv_bank_size=2, conv_channels=4,
        highway_layers=1, encoder_dim=8, decoder_prenet_dims=[8, 4], prenet_dropout=0.0,
        attention=attention, attention_rnn_dim=8, decoder_rnn_dim=8, gmm_mixtures=2, attention_dim=4,
        location_filters=2, location_kernel=3, n_speakers=2, speaker_embedding_dim=2,
        noise_embedding_dim=2, codebook_size=4, codebook_dim=4, vq_hidden_dim=4, adv_gru_dim=4,
        adv_hidden_dim=4,
    )


def _edit_distance(a: List[Any], b: List[Any]) -> int:
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        current = [i]
        for j, y in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y)))
        previous = current
    return previous[-1]


def _exhaustive_dtw(cost: np.ndarray) -> float:
    """Minimum path cost over every monotone path, by enumeration"""
    n, m = cost.shape
    best = math.inf

    def walk(i: int, j: int, total: float):
        nonlocal best
        total += cost[i, j]
        if i == n - 1 and j == m - 1:
            best = min(best, total)
            return
        if i + 1 < n:
            walk(i + 1, j, total)
        if j + 1 < m:
            walk(i, j + 1, total)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, total)

    walk(0, 0, 0.0)
    return best


class SelfCheck:
    """
    Runs every check and collects the results.

    `gradient_reversal_fn` replaces the reversal layer under test, so a
    broken implementation can be fed through the sign-flip check.
    """

    def __init__(self, seed: int = 0, quick: bool = False,
                 gradient_reversal_fn: Optional[Callable[[torch.Tensor, float], torch.Tensor]] = None):
        self.seed = seed
        self.quick = quick
        self.gradient_reversal_fn = gradient_reversal_fn or gradient_reversal
        self.logger = logging.getLogger(self.__class__.__name__)

    def checks(self) -> List[Callable[[], CheckResult]]:
        return [
            self.check_stop_gradient,
            self.check_gradient_reversal,
            self.check_straight_through,
            self.check_finite_differences,
            self.check_model_gradients,
            self.check_quantizer,
            self.check_snr_oracle,
            self.check_cer_oracle,
            self.check_levenshtein,
            self.check_dtw,
            self.check_mcd_identity,
        ]

    def run(self) -> List[CheckResult]:
        results = []
        for check in self.checks():
            name = check.__name__.replace("check_", "")
            try:
                result = check()
            except (FoundTTSError, ValueError, RuntimeError) as e:
                result = CheckResult(name, False, {'error': f"{type(e).__name__}: {e}"})
            level = logging.INFO if result.passed else logging.ERROR
            self.logger.log(level, f"{'PASS' if result.passed else 'FAIL'} {result.name} {result.details}")
            results.append(result)
        return results

    @staticmethod
    def report(results: List[CheckResult]) -> Dict[str, Any]:
        return {
            'passed': all(r.passed for r in results),
            'checks': [r.to_dict() for r in results],
        }

    # ------------------------------------------------------------------
    # Gradient contracts
    # ------------------------------------------------------------------

    def check_stop_gradient(self) -> CheckResult:
        x = torch.tensor([1.0, -2.0], dtype=torch.float64, requires_grad=True)
        y = stop_gradient(x)
        (y * 5.0).sum().backward()
        forward_ok = torch.equal(y.detach(), x.detach())
        grad_max = float(x.grad.abs().max())
        return CheckResult("stop_gradient", forward_ok and grad_max == 0.0,
                           {'forward_identity': forward_ok, 'max_abs_grad': grad_max})

    def check_gradient_reversal(self) -> CheckResult:
        generator = torch.Generator().manual_seed(self.seed)
        net = nn.Sequential(nn.Linear(6, 5), nn.Tanh(), nn.Linear(5, 2)).double()
        x = torch.randn(3, 6, dtype=torch.float64, generator=generator)
        labels = torch.tensor([0, 1, 1])

        def grad_of(transform) -> torch.Tensor:
            point = x.clone().requires_grad_(True)
            loss = nn.functional.cross_entropy(net(transform(point)), labels)
            (grad,) = torch.autograd.grad(loss, point)
            return grad

        plain = grad_of(lambda v: v)
        worst = 0.0
        for strength in (1.0, 0.5):
            reversed_grad = grad_of(lambda v: self.gradient_reversal_fn(v, strength))
            worst = max(worst, float((reversed_grad + strength * plain).abs().max()))
        forward = self.gradient_reversal_fn(x, 1.0)
        forward_ok = torch.equal(forward.detach(), x)
        return CheckResult("gradient_reversal", forward_ok and worst < 1e-12,
                           {'max_abs_err': worst, 'forward_identity': forward_ok})

    def check_straight_through(self) -> CheckResult:
        z_e = torch.tensor([[0.3, -1.2, 2.0]], dtype=torch.float64, requires_grad=True)
        z_q = torch.tensor([[0.0, -1.0, 2.5]], dtype=torch.float64, requires_grad=True)
        weights = torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64)
        z = straight_through(z_e, z_q)
        (z * weights).sum().backward()
        forward_err = float((z.detach() - z_q.detach()).abs().max())
        routed_err = float((z_e.grad - weights).abs().max())
        leaked = float(z_q.grad.abs().max())
        return CheckResult("straight_through", forward_err < 1e-12 and routed_err == 0.0 and leaked == 0.0,
                           {'forward_err': forward_err, 'routed_err': routed_err, 'z_q_grad': leaked})

    def check_finite_differences(self) -> CheckResult:
        """Composed differentiable kernels against central differences"""
        generator = torch.Generator().manual_seed(self.seed)
        results: Dict[str, float] = {}

        weights = torch.softmax(torch.randn(1, 3, dtype=torch.float64, generator=generator), dim=-1)
        scales = torch.rand(1, 3, dtype=torch.float64, generator=generator) + 0.5
        mask = torch.ones(1, 7, dtype=torch.bool)
        target = torch.rand(1, 7, dtype=torch.float64, generator=generator)
        means = torch.tensor([[1.0, 2.5, 4.0]], dtype=torch.float64)
        results['gmm_alignment'] = finite_diff_check(
            lambda m: (gmm_alignment(weights, m, scales, mask) * target).sum(), means, seed=self.seed
        ).max_rel_err

        z_s = torch.randn(2, 5, 3, dtype=torch.float64, generator=generator)
        frame_mask = torch.tensor([[True] * 5, [True] * 3 + [False] * 2])
        results['sentence_pool'] = finite_diff_check(
            lambda z: sentence_pool(z, frame_mask).pow(2).sum(), z_s, seed=self.seed
        ).max_rel_err

        logits = torch.randn(2, 5, 2, dtype=torch.float64, generator=generator)
        labels = torch.tensor([0, 1])
        results['noise_cross_entropy'] = finite_diff_check(
            lambda v: noise_cross_entropy(v, labels, frame_mask), logits, seed=self.seed
        ).max_rel_err

        codebook = torch.randn(4, 3, dtype=torch.float64, generator=generator)
        z_e = torch.randn(6, 3, dtype=torch.float64, generator=generator)
        decoder = torch.randn(3, 2, dtype=torch.float64, generator=generator)

        def indices_of(point: torch.Tensor) -> torch.Tensor:
            return quantize(point, codebook).indices

        def st_loss(point: torch.Tensor) -> torch.Tensor:
            return (quantize(point, codebook).z_st @ decoder).tanh().sum()

        frozen = codebook[indices_of(z_e)]
        results['straight_through_decoder'] = finite_diff_check(
            st_loss, z_e, seed=self.seed,
            oracle=lambda point: ((point + (frozen - z_e)) @ decoder).tanh().sum(),
            reject=lambda plus, minus: not (torch.equal(indices_of(plus), indices_of(z_e))
                                            and torch.equal(indices_of(minus), indices_of(z_e))),
        ).max_rel_err

        worst = max(results.values())
        return CheckResult("finite_differences", worst < REL_TOL, {'max_rel_err': results})

    def check_model_gradients(self) -> CheckResult:
        """Micro model in double precision, reconstruction loss wrt decoder inputs"""
        results: Dict[str, float] = {}
        rng = np.random.default_rng(self.seed)
        examples = [
            TrainingExample("a", [1, 2, 3, 4], rng.uniform(-1, 0, (5, 4)).astype(np.float32), 0,
                            NoiseCondition.CLEAN),
            TrainingExample("b", [2, 3, 4], rng.uniform(-1, 0, (4, 4)).astype(np.float32), 1,
                            NoiseCondition.NOISY),
        ]
        batch = collate(examples)
        batch = replace(batch, mel_inputs=batch.mel_inputs.double(), mel_targets=batch.mel_targets.double(),
                        stop_targets=batch.stop_targets.double())
        train = TrainConfig()
        for attention in ("gmm", "lsa"):
            for adversarial in (False, True):
                torch.manual_seed(self.seed)
                model = AcousticModel(micro_model_config(attention), vocab_size=6,
                                      use_adversarial=adversarial).double()

                def loss(mel_inputs: torch.Tensor) -> torch.Tensor:
                    outputs = model(batch.text, batch.text_lengths, mel_inputs, batch.speakers,
                                    batch.conditions, batch.frame_mask)
                    return compose_losses(outputs, batch, train, TrainMode.BASELINE).reconstruction

                name = f"{attention}{'+adversarial' if adversarial else ''}"
                results[name] = finite_diff_check(loss, batch.mel_inputs, n_probes=16,
                                                  seed=self.seed).max_rel_err
        worst = max(results.values())
        return CheckResult("model_gradients", worst < REL_TOL, {'max_rel_err': results})

    # ------------------------------------------------------------------
    # Quantizer
    # ------------------------------------------------------------------

    def check_quantizer(self) -> CheckResult:
        rng = np.random.default_rng(self.seed)
        draws = 1000 if self.quick else 10000
        mismatches = 0
        for _ in range(draws):
            k = int(rng.integers(1, 9))
            d = int(rng.integers(1, 6))
            codebook = rng.standard_normal((k, d))
            z_e = rng.standard_normal((int(rng.integers(1, 5)), d))
            brute = np.argmin(((z_e[:, None, :] - codebook[None, :, :]) ** 2).sum(-1), axis=1)
            got = quantize(torch.from_numpy(z_e), torch.from_numpy(codebook)).indices.numpy()
            mismatches += int((brute != got).sum())
        tied = torch.tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], dtype=torch.float64)
        tie_index = int(quantize(torch.tensor([[1.0, 0.0]], dtype=torch.float64), tied).indices[0])
        return CheckResult("quantizer", mismatches == 0 and tie_index == 0,
                           {'draws': draws, 'mismatches': mismatches, 'tie_index': tie_index})

    # ------------------------------------------------------------------
    # Corpus oracles
    # ------------------------------------------------------------------

    def _inventory(self) -> SymbolInventory:
        return SymbolInventory.build(CorpusConfig(n_symbols=12), seed=self.seed)

    def check_snr_oracle(self) -> CheckResult:
        inventory = self._inventory()
        rng = np.random.default_rng(self.seed)
        worst = 0.0
        for i, (kind, snr) in enumerate(itertools.product(
                [NoiseKind.WHITE, NoiseKind.PINK, NoiseKind.BABBLE, NoiseKind.HUM], [4.0, 8.0])):
            symbols, durations = inventory.sample_utterance(rng, 8, 16)
            clean = render_waveform(symbols, durations, inventory, (self.seed, i))
            mix = mix_noise(clean, kind, snr, (self.seed, i, 1), inventory)
            measured = measure_snr(clean * mix.gain, mix.noise)
            worst = max(worst, abs(measured - snr))
        return CheckResult("snr_oracle", worst <= 0.1, {'max_abs_db_err': worst})

    def check_cer_oracle(self) -> CheckResult:
        inventory = self._inventory()
        rng = np.random.default_rng(self.seed)
        corruptor = TranscriptCorruptor(0.233, inventory=inventory)
        errors = reference = 0
        for _ in range(100 if self.quick else 400):
            symbols, _ = inventory.sample_utterance(rng, 8, 40)
            result = corruptor.corrupt(symbols, rng)
            errors += levenshtein(symbols, result.symbols).errors
            reference += len(symbols)
        achieved = errors / reference
        return CheckResult("cer_oracle", abs(achieved - 0.233) <= 0.01,
                           {'target': 0.233, 'achieved': achieved})

    # ------------------------------------------------------------------
    # Metric kernels
    # ------------------------------------------------------------------

    def check_levenshtein(self) -> CheckResult:
        rng = np.random.default_rng(self.seed)
        mismatches = 0
        pairs = 200 if self.quick else 1000
        for _ in range(pairs):
            a = list(rng.integers(0, 4, size=int(rng.integers(0, 12))))
            b = list(rng.integers(0, 4, size=int(rng.integers(0, 12))))
            if not a:
                a = [0]
            mismatches += int(levenshtein(a, b).errors != _edit_distance(a, b))
        return CheckResult("levenshtein", mismatches == 0, {'pairs': pairs, 'mismatches': mismatches})

    def check_dtw(self) -> CheckResult:
        rng = np.random.default_rng(self.seed)
        worst = 0.0
        for n, m in itertools.product(range(1, 6), repeat=2):
            a = rng.standard_normal((n, 3))
            b = rng.standard_normal((m, 3))
            cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
            _, got = dtw_arrays(a, b)
            worst = max(worst, abs(got - _exhaustive_dtw(cost)))
        return CheckResult("dtw", worst < 1e-9, {'max_abs_err': worst})

    def check_mcd_identity(self) -> CheckResult:
        inventory = self._inventory()
        rng = np.random.default_rng(self.seed)
        symbols, durations = inventory.sample_utterance(rng, 8, 12)
        mel = mel_spectrogram(render_waveform(symbols, durations, inventory, self.seed), inventory.features)
        value = mcd(mel, mel)
        return CheckResult("mcd_identity", value == 0.0, {'mcd': value})
