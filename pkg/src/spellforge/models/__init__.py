from .checkpoint import (Checkpoint, CheckpointError, CheckpointFormatError, CheckpointHashError,
                         CheckpointTruncatedError, CheckpointVersionError, load_checkpoint,
                         read_checkpoint, save_checkpoint)
from .config import ModelConfig, desk_config, load_model_config, reference_config, write_model_config
from .correctors import ARCHS, SubwordTagModel, WordCharModel, build_model
from .data import Batch, Item, Resources, make_batch, prepare
from .inference import correct_batch, correct_sentence
from .mlm import MaskCounts, mask_tokens, mlm_pretrain, new_subword_encoder
from .training import (TrainingDiverged, TrainResult, TrainSchedule, evaluate_model, select_best,
                       train, word_accuracy)

__all__ = [
    "Checkpoint", "CheckpointError", "CheckpointFormatError", "CheckpointHashError",
    "CheckpointTruncatedError", "CheckpointVersionError", "load_checkpoint", "read_checkpoint",
    "save_checkpoint", "ModelConfig", "desk_config", "load_model_config", "reference_config",
    "write_model_config", "ARCHS", "SubwordTagModel", "WordCharModel", "build_model", "Batch",
    "Item", "Resources", "make_batch", "prepare", "correct_batch", "correct_sentence",
    "MaskCounts", "mask_tokens", "mlm_pretrain", "new_subword_encoder", "TrainingDiverged",
    "TrainResult", "TrainSchedule", "evaluate_model", "select_best", "train", "word_accuracy",
]
