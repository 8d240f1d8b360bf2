"""Chemistry LLM gym: formats, augmentation, sampling, rewards, evaluation."""

from .chem import (
    Atom,
    Bond,
    BondOrder,
    Fingerprint,
    Molecule,
    circular_fingerprint,
    is_valid_smiles,
    kekulize,
    parse_smiles,
    random_traversal_smiles,
    tanimoto,
    to_canonical_smiles,
)
from .rewards import (
    Completion,
    Group,
    RewardReport,
    RewardWeights,
    group_advantages,
    reward_classification,
    reward_format,
    reward_generation,
    reward_regression,
    reward_think,
    score,
)
from .sampler import (
    DEFAULT_CATEGORIES,
    AnswerType,
    Entity,
    Registry,
    TaskRecord,
    load_jsonl,
    record_from_json,
    sample_batch,
)
from .selfies import decode_selfies, encode_selfies, selfies_alphabet
from .spatial import (
    Conformer,
    ProteinStructure,
    Residue,
    decode_conformer,
    decode_protein,
    encode_conformer,
    encode_protein,
)
from .tokenizer import (
    AugmentationPolicy,
    TokenSequence,
    Vocabulary,
    ascii_text_tokens,
    augment_record,
    detokenize,
    tokenize,
    tokenize_chat,
)

__version__ = "0.1.0"

__all__ = [
    "Atom", "Bond", "BondOrder", "Fingerprint", "Molecule",
    "circular_fingerprint", "is_valid_smiles", "kekulize", "parse_smiles",
    "random_traversal_smiles", "tanimoto", "to_canonical_smiles",
    "decode_selfies", "encode_selfies", "selfies_alphabet",
    "AugmentationPolicy", "TokenSequence", "Vocabulary", "ascii_text_tokens",
    "augment_record", "detokenize", "tokenize", "tokenize_chat",
    "Conformer", "ProteinStructure", "Residue", "decode_conformer",
    "decode_protein", "encode_conformer", "encode_protein",
    "DEFAULT_CATEGORIES", "AnswerType", "Entity", "Registry", "TaskRecord",
    "load_jsonl", "record_from_json", "sample_batch",
    "Completion", "Group", "RewardReport", "RewardWeights",
    "group_advantages", "reward_classification", "reward_format",
    "reward_generation", "reward_regression", "reward_think", "score",
    "__version__",
]
