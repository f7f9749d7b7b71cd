"""Zero/few-shot multi-label text classification with graph-fused label embeddings."""

__version__ = "0.1.0"
