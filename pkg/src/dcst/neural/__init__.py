from .archive import ArchiveError, dumps, load, loads, save
from .embeddings import EmbeddingFileError, load_pretrained_embeddings
from .gradcheck import GradCheckReport, NonFiniteError, grad_check
from .params import ParameterStore, adam_update, clip_grad_norm, substream
from .tensor import ShapeError, Tape, Tensor
from .vocab import Vocab

__all__ = [
    "ArchiveError", "EmbeddingFileError", "GradCheckReport", "NonFiniteError", "ParameterStore",
    "ShapeError", "Tape", "Tensor", "Vocab", "adam_update", "clip_grad_norm", "dumps", "grad_check",
    "load", "load_pretrained_embeddings", "loads", "save", "substream",
]
