"""Multimodal sarcasm detection: text + image features, linear SVM and fusion network."""

__version__ = "0.1.0"
