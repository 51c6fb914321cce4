import re
import string

_WHITESPACE = re.compile(r"\s+")
_PUNCTUATION = str.maketrans({c: " " for c in string.punctuation})


def normalize_name(name: str) -> str:
    """Lowercases, trims and collapses internal whitespace. Used for duplicate detection."""
    if not name:
        return ""
    return _WHITESPACE.sub(" ", name.strip().lower())


def normalize_text(text: str) -> str:
    """normalize_name plus punctuation stripping. Used by embeddings and query matching."""
    if not text:
        return ""
    return normalize_name(text.translate(_PUNCTUATION))


def slugify(name: str) -> str:
    """Builds a stable node id stem from a metric name."""
    stem = re.sub(r"\W+", "_", normalize_name(name)).strip("_")
    return stem or "node"
