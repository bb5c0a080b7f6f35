"""Dense float64 neural stack: layers, classifiers, Adam and gradient checks."""
from .io import load_model, model_from_dict, model_to_dict, save_model
from .layers import (
    AttentionParams,
    AutoencoderParams,
    GruParams,
    LstmParams,
    MlpParams,
    attention_weights,
    autoencode,
    gru_gates,
    gru_step,
    lstm_gates,
    lstm_step,
    mlp_forward,
    scaled_dot_attention,
    sigmoid,
    softmax,
)
from .models import (
    MODEL_KINDS,
    AutoencoderModel,
    GruModel,
    LstmModel,
    MlpModel,
    NextEdgeModel,
    TransformerModel,
    build_model,
    reconstruction_loss_and_grad,
)
from .optim import (
    AdamState,
    TrainConfig,
    adam_step,
    cross_entropy_batch,
    cross_entropy_loss,
    fit,
    grad_check,
)

__all__ = [
    "AdamState", "AttentionParams", "AutoencoderModel", "AutoencoderParams", "GruModel",
    "GruParams", "LstmModel", "LstmParams", "MODEL_KINDS", "MlpModel", "MlpParams",
    "NextEdgeModel", "TrainConfig", "TransformerModel", "adam_step", "attention_weights",
    "autoencode", "build_model", "cross_entropy_batch", "cross_entropy_loss", "fit",
    "grad_check", "gru_gates", "gru_step", "load_model", "lstm_gates", "lstm_step",
    "mlp_forward", "model_from_dict", "model_to_dict", "reconstruction_loss_and_grad",
    "save_model", "scaled_dot_attention", "sigmoid", "softmax",
]
