from .model import (Hyperparams, SurrogateModel, backward, forward, load_model,
                    loss_bce, predict_compressed, save_model)
from .train import (Adam, SearchBudget, SearchSpace, TrainReport, TrialResult,
                    hyperparameter_search, train)

__all__ = [
    "Adam", "Hyperparams", "SearchBudget", "SearchSpace", "SurrogateModel",
    "TrainReport", "TrialResult", "backward", "forward", "hyperparameter_search",
    "load_model", "loss_bce", "predict_compressed", "save_model", "train",
]
