"""verilab: perturbation attacks, risk accounting, robust training and
margin certification for small classifiers."""

from .attacks import (AttackConfig, AttackLedger, ThreatModel, batch_attack,
                      brute_force_attack, brute_force_search, pgd, pgd_batch)
from .autodiff import (Tensor, affine, backward, cross_entropy, kl_divergence,
                       linf_layer, linf_unit, log_softmax, relu)
from .certify import CertReport, certify_adversarial, certify_hypocritical, certify_model
from .data import (Dataset, SyntheticSpec, gen_synthetic, load_dataset,
                   load_dataset_text, make_mislabeling, make_noise, make_poisoning,
                   make_quality, make_variant, save_dataset)
from .errors import (ConfigError, ContractError, DimensionError, NumericError,
                     ParseError, ResourceError, VerilabError)
from .models import (ModelParams, ModelSpec, forward_logits, init_params, load_model,
                     margin, predict, save_model)
from .risk import (IndicatorLedger, RiskReport, attack_success_rate, build_ledger,
                   check_decompositions, estimate_risks)
from .training import TrainConfig, evaluation_suite, lambda_sweep, train

__all__ = [name for name in dir() if not name.startswith("_")]
