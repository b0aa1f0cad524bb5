"""Similarity-distribution distillation: train a small encoder to mimic a
frozen teacher's softmax similarity scores over a FIFO feature queue."""

__version__ = "0.1.0"
