"""Stand-alone spelling correction with small numpy transformers.

Corpus handling, misspelling injection, tokenizers, a reverse-mode
autodiff engine, word/char/subword correctors and token-level metrics.
"""

__version__ = "0.1.0"
