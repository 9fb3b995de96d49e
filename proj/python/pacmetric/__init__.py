"""Captioning metric engine bindings."""

from ._pacmetric import (
    FormatError,
    harmonic_mean,
    info_nce,
    kendall_tau_b,
    kendall_tau_c,
    l2_normalize,
    load_embeddings,
    pac_score,
    pct_incorrect_endings,
    ref_pac_score,
    rep_n,
    save_embeddings,
    scst_demo,
    score_images,
    score_videos,
    spearman_rho,
    tokenize_caption,
    train_synthetic,
    video_score,
)

__all__ = [
    "FormatError",
    "harmonic_mean",
    "info_nce",
    "kendall_tau_b",
    "kendall_tau_c",
    "l2_normalize",
    "load_embeddings",
    "pac_score",
    "pct_incorrect_endings",
    "ref_pac_score",
    "rep_n",
    "save_embeddings",
    "scst_demo",
    "score_images",
    "score_videos",
    "spearman_rho",
    "tokenize_caption",
    "train_synthetic",
    "video_score",
]
