"""Single-channel source separation with MMSE-regularized IS-NMF under GMM gain priors."""

from .config import ToolConfig, load_config
from .gmm import GmmPrior, fit_gmm_em, gmm_log_density, log_normalize_columns, responsibilities
from .metrics import EvalReport, evaluate, sir_db, snr_db
from .mmse import mmse_estimate
from .modelfile import load_model, save_model
from .nmf import (NmfConfig, decompose_fixed_basis, factorize, is_divergence, update_basis,
                  update_gains)
from .regnmf import (GradientSplit, MmsePrior, SparsePrior, gamma_split, h_split,
                     mmse_jacobian_split, penalty_gradient_split, penalty_value,
                     regularized_cost, regularized_update_gains, sparse_update_gains)
from .separation import (SeparationResult, SourceModel, learn_uncertainties_stage, mix_at_smr,
                         separate, train_source_model)
from .spectral import (AudioSignal, Spectrogram, istft, power_spectrogram, read_wav, stft,
                       write_wav)
from .uncertainty import PosteriorStats, learn_psi_em, posterior_stats

__version__ = "0.1.0"
