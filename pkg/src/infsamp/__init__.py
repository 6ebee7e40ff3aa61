"""Influence-guided probabilistic subsampling for noisy bag-labeled data.

The pipeline scores each training instance by its effect on the validation
loss (through an inverse Hessian-vector product against the last-layer
weights), converts scores to keep probabilities with a sigmoid, and samples
a fixed fraction inside every bag at each training batch. Exact dense
solves and leave-one-out retraining serve as desk-scale oracles for every
approximation.
"""

__version__ = "0.1.0"

from .data import (Bag, Dataset, Instance, NoiseSpec, PatternParams,
                   build_validation_set, generate_synthetic_ds, load_dataset,
                   save_dataset)
from .errors import (ConfigError, ContractViolation, DivergenceError,
                     SchemaError, SingularHessianError)
from .evaluation import (BagPrediction, NoiseReport, PrCurve, auroc,
                         bag_level_predict, noise_detection_report, pr_curve,
                         precision_at_n)
from .influence import (InfluenceReport, InverseHvp, LissaParams,
                        aggregate_validation_gradient, exact_inverse_hvp,
                        influence_matrix, influence_scores, lissa_inverse_hvp,
                        loo_retrain_oracle)
from .model import (ErmConfig, SoftmaxModel, accuracy, batch_gradients,
                    batch_predict_proba, cross_entropy_loss,
                    hessian_vector_product, last_layer_gradient, load_model,
                    mean_loss, one_hot, predict_proba, save_model, train_erm)
from .sampling import (RobustnessBound, SamplerConfig, SelectionResult,
                       batch_in_bag_sample, post_hoc_sample, robustness_bound,
                       sigmoid_derivative, sigmoid_probability)
from .trainer import (RunConfig, TrainHistory, baseline_train,
                      influence_train, train)

__all__ = [name for name in dir() if not name.startswith("_")]
