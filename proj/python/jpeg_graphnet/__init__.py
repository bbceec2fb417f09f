"""JPEG-domain steganalysis detector (C++ core)."""

from ._jgn import (
    Dataset,
    Detector,
    FormatError,
    NumericError,
    ShapeError,
    block_dct,
    block_idct,
    compress,
    count_nzac,
    decompress,
    embed_toy,
    evaluate_pe,
    fold_to_blocks,
    load_dataset,
    quant_table,
    srm_bank,
    synthesize,
    unfold_from_blocks,
)

__all__ = [name for name in dir() if not name.startswith("_")]
