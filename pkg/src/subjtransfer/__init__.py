"""Target-centred subject transfer augmentation for motor-imagery EEG classification.

Cross-subject trials are filtered by relevance to a target subject, mapped into
the target's signal domain by a cycle-consistent adversarial transfer model and
added to the target's small training set for a compact CNN classifier.
"""

from .dataio import SubjectDataset, TrialTensor, load_dataset, save_dataset, synth_generate
from .preprocess import PreprocessConfig, preprocess_pipeline
from .protocol import ProtocolConfig, run_protocol

__version__ = "0.1.0"

__all__ = [
    "PreprocessConfig",
    "ProtocolConfig",
    "SubjectDataset",
    "TrialTensor",
    "load_dataset",
    "preprocess_pipeline",
    "run_protocol",
    "save_dataset",
    "synth_generate",
]
