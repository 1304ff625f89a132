"""textveil: anonymize free-text records, audit the result, and model on embeddings."""

__version__ = "0.1.0"
