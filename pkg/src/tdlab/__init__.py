"""Weight-shared Transformer encoder studied as a discrete-time dynamical system.

Library layout:

    encoder    the shared layer f and its iteration on state matrices
    embedding  token-ID sentences to initial states x0 = u(s)
    dynamics   D(t), Lyapunov exponents, effective dimension, transient chaos, PCA
    readout    ridge / softmax readouts, handwriting and masked-token sweeps
    container  named-tensor binary files and pre-trained weight import
    harness    config-driven experiments with CSV/report output
    cli        `tdlab` command-line front end
"""

from .container import (ContainerFormatError, ManifestError, ShapeError,
                        export_params, import_weights, read_container, write_container)
from .dynamics import (AnalysisSeries, DegenerateEnsembleError, LLEParams,
                       LyapunovSeries, MapUnderStudy, PCAProjection,
                       TransientChaosResult, deviation_series, effective_dimension,
                       effective_dimension_series, encoder_map, local_lyapunov,
                       logistic_map, participation_ratio, pca_project,
                       perturbation_response, scalar_linear_map, sync_offset,
                       transient_chaos_length, write_series_csv)
from .embedding import (EmbeddingParams, Vocabulary, build_vocab, embed,
                        init_embedding_params, load_pretokenized, tokenize)
from .encoder import (EncoderConfig, EncoderParams, NumericalOverflowError,
                      StateTrajectory, attention_probabilities, encoder_step, gelu,
                      init_params, iterate, layer_norm, multi_head_attention)
from .harness import (ConfigError, EnsembleFailureError, ExperimentConfig, RunReport,
                      config_to_text, export_report, load_config, run_experiment)
from .readout import (LETTER_S, LETTER_U, HandwritingTargets, LetterPath, ReadoutModel,
                      fit_ridge, fit_softmax, handwriting_sweep, layer_sweep,
                      letter_targets, load_letter_path, nmse, pearson)

__version__ = "0.1.0"
